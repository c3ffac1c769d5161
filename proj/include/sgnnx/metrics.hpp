#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "sgnnx/merge.hpp"

namespace sgnnx {

struct UndefinedMetricError : std::domain_error {
    using std::domain_error::domain_error;
};

// Probability that a random positive outranks a random negative, ties
// counted one half (midrank convention). Throws when the truth vector is
// single-class; callers exclude those instances from aggregation.
inline double auc(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
    if (scores.size() != truth.size())
        throw std::invalid_argument("auc: scores and truth lengths differ");
    std::size_t n_pos = 0;
    for (std::uint8_t t : truth) n_pos += t ? 1 : 0;
    std::size_t n_neg = truth.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetricError("auc: needs at least one positive and one negative label");

    // midranks
    std::vector<int> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k)
        if (truth[k]) rank_sum_pos += rank[k];
    double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// 100 * |{e : score > t}| / |E|.
inline double mask_size_percent(const Explanation& expl, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("mask_size_percent: threshold must be in (0,1)");
    if (expl.scores.empty()) return 0.0;
    int above = 0;
    for (double s : expl.scores)
        if (s > threshold) ++above;
    return 100.0 * above / static_cast<double>(expl.scores.size());
}

// ---------------------------------------------------------------------
// Aggregation into the (encoder, policy) result table
// ---------------------------------------------------------------------

// Per-seed summary of one run: mean over evaluated graphs.
struct RunResult {
    std::string dataset;
    std::string encoder; // "ds", "dss" or "baseline"
    std::string policy;  // "ed", "nd", "en", "en+", "none"
    std::uint64_t seed = 0;
    double mean_auc = 0.0;
    double mean_mask_size = 0.0;
    int graphs_evaluated = 0;
};

struct AggregateRow {
    std::string dataset;
    std::string encoder;
    std::string policy;
    int num_seeds = 0;
    double auc_mean = 0.0, auc_std = 0.0;
    double mask_mean = 0.0, mask_std = 0.0;
};

// Mean and population std over seeds of the per-seed means.
inline std::vector<AggregateRow> aggregate_results(const std::vector<RunResult>& runs) {
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<const RunResult*>> groups;
    for (const RunResult& r : runs) groups[{r.dataset, r.encoder, r.policy}].push_back(&r);
    std::vector<AggregateRow> rows;
    for (const auto& [key, members] : groups) {
        AggregateRow row;
        std::tie(row.dataset, row.encoder, row.policy) = key;
        row.num_seeds = static_cast<int>(members.size());
        double sa = 0.0, sm = 0.0;
        for (const RunResult* r : members) {
            sa += r->mean_auc;
            sm += r->mean_mask_size;
        }
        row.auc_mean = sa / row.num_seeds;
        row.mask_mean = sm / row.num_seeds;
        double va = 0.0, vm = 0.0;
        for (const RunResult* r : members) {
            va += (r->mean_auc - row.auc_mean) * (r->mean_auc - row.auc_mean);
            vm += (r->mean_mask_size - row.mask_mean) * (r->mean_mask_size - row.mask_mean);
        }
        row.auc_std = std::sqrt(va / row.num_seeds);
        row.mask_std = std::sqrt(vm / row.num_seeds);
        rows.push_back(row);
    }
    return rows;
}

inline std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

inline std::string format_result_table(const std::vector<AggregateRow>& rows) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os << "Dataset        EFE   Policy  Mask size (%)   AUC\n";
    os << "-------------------------------------------------------\n";
    for (const AggregateRow& r : rows) {
        os.precision(0);
        os.width(0);
        std::string mask;
        {
            std::ostringstream t;
            t.setf(std::ios::fixed);
            t.precision(0);
            t << r.mask_mean << " +/- " << r.mask_std;
            mask = t.str();
        }
        std::string aucs;
        {
            std::ostringstream t;
            t.setf(std::ios::fixed);
            t.precision(2);
            t << r.auc_mean << " +/- " << r.auc_std;
            aucs = t.str();
        }
        os << pad(r.dataset, 15) << pad(r.encoder, 6) << pad(r.policy, 8) << pad(mask, 16) << aucs
           << "\n";
    }
    return os.str();
}

} // namespace sgnnx
