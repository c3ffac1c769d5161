#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <fstream>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sgnnx/matrix.hpp"
#include "sgnnx/rng.hpp"

namespace sgnnx::ad {

struct Shape {
    int rows = 0;
    int cols = 0;
    int size() const { return rows * cols; }
    bool operator==(const Shape& o) const { return rows == o.rows && cols == o.cols; }
    std::string str() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (!(a == b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.str() + " vs " + b.str());
}

// A named trainable array with its gradient accumulator and Adam state.
struct Param {
    std::string name;
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<double> adam_m;
    std::vector<double> adam_v;
};

// Owns the parameters of one model. Also carries the Adam step counter
// and the checkpoint (de)serialization.
class ParamStore {
public:
    Param& create(const std::string& name, int rows, int cols) {
        if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate param " + name);
        auto p = std::make_unique<Param>();
        p->name = name;
        p->shape = Shape{rows, cols};
        p->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        p->grad.assign(p->value.size(), 0.0);
        p->adam_m.assign(p->value.size(), 0.0);
        p->adam_v.assign(p->value.size(), 0.0);
        index_.emplace(name, params_.size());
        params_.push_back(std::move(p));
        return *params_.back();
    }

    // Glorot-uniform init.
    Param& create_glorot(const std::string& name, int rows, int cols, Rng& rng) {
        Param& p = create(name, rows, cols);
        double bound = std::sqrt(6.0 / (rows + cols));
        for (double& v : p.value) v = rng.uniform(-bound, bound);
        return p;
    }

    Param& create_uniform(const std::string& name, int rows, int cols, double bound, Rng& rng) {
        Param& p = create(name, rows, cols);
        for (double& v : p.value) v = rng.uniform(-bound, bound);
        return p;
    }

    Param& get(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("ParamStore: no param " + name);
        return *params_[it->second];
    }

    std::size_t count() const { return params_.size(); }
    Param& at(std::size_t i) { return *params_[i]; }
    const Param& at(std::size_t i) const { return *params_[i]; }

    void zero_grad() {
        for (auto& p : params_)
            std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }

    // Rescales all gradients so their global L2 norm is at most max_norm.
    void clip_grad_norm(double max_norm) {
        double sq = 0.0;
        for (auto& p : params_)
            for (double g : p->grad) sq += g * g;
        double norm = std::sqrt(sq);
        if (norm <= max_norm || norm == 0.0) return;
        double scale = max_norm / norm;
        for (auto& p : params_)
            for (double& g : p->grad) g *= scale;
    }

    // Standard Adam with bias correction; one shared step counter.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        ++adam_t_;
        double bc1 = 1.0 - std::pow(beta1, adam_t_);
        double bc2 = 1.0 - std::pow(beta2, adam_t_);
        for (auto& p : params_) {
            for (std::size_t i = 0; i < p->value.size(); ++i) {
                double g = p->grad[i];
                p->adam_m[i] = beta1 * p->adam_m[i] + (1.0 - beta1) * g;
                p->adam_v[i] = beta2 * p->adam_v[i] + (1.0 - beta2) * g * g;
                double mhat = p->adam_m[i] / bc1;
                double vhat = p->adam_v[i] / bc2;
                p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    void reset_adam() {
        adam_t_ = 0;
        for (auto& p : params_) {
            std::fill(p->adam_m.begin(), p->adam_m.end(), 0.0);
            std::fill(p->adam_v.begin(), p->adam_v.end(), 0.0);
        }
    }

    std::vector<double> flatten_values() const {
        std::vector<double> out;
        for (const auto& p : params_) out.insert(out.end(), p->value.begin(), p->value.end());
        return out;
    }

    void load_values(const std::vector<double>& flat) {
        std::size_t off = 0;
        for (auto& p : params_) {
            if (off + p->value.size() > flat.size())
                throw std::invalid_argument("ParamStore: flat value vector too short");
            std::copy(flat.begin() + off, flat.begin() + off + p->value.size(), p->value.begin());
            off += p->value.size();
        }
        if (off != flat.size()) throw std::invalid_argument("ParamStore: flat value vector too long");
    }

    // Text checkpoint: "# key value" header lines, then one line per
    // param: name rows cols v0 v1 ...
    void save(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& header = {}) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("ParamStore: cannot write " + path);
        f.precision(17);
        for (const auto& [k, v] : header) f << "# " << k << " " << v << "\n";
        for (const auto& p : params_) {
            f << p->name << " " << p->shape.rows << " " << p->shape.cols;
            for (double v : p->value) f << " " << v;
            f << "\n";
        }
    }

    // Reads header key/values; param lines must match the existing layout.
    static std::unordered_map<std::string, std::string> read_header(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("ParamStore: cannot read " + path);
        std::unordered_map<std::string, std::string> h;
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty() || line[0] != '#') break;
            std::size_t sp1 = line.find(' ', 2);
            if (sp1 == std::string::npos) continue;
            h[line.substr(2, sp1 - 2)] = line.substr(sp1 + 1);
        }
        return h;
    }

    void load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("ParamStore: cannot read " + path);
        std::string line;
        std::size_t next = 0;
        while (std::getline(f, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (next >= params_.size()) throw std::runtime_error("checkpoint has extra params: " + path);
            Param& p = *params_[next++];
            std::istringstream is(line);
            std::string name;
            int r, c;
            is >> name >> r >> c;
            if (name != p.name || r != p.shape.rows || c != p.shape.cols)
                throw std::runtime_error("checkpoint param mismatch at " + p.name);
            for (double& v : p.value)
                if (!(is >> v)) throw std::runtime_error("checkpoint truncated at " + p.name);
        }
        if (next != params_.size()) throw std::runtime_error("checkpoint missing params: " + path);
    }

private:
    std::vector<std::unique_ptr<Param>> params_;
    std::unordered_map<std::string, std::size_t> index_;
    long adam_t_ = 0;
};

// Reverse-mode tape over dense matrices. Nodes are appended in forward
// order; backward() walks them in reverse, so the recording order is a
// valid topological order by construction.
class Tape {
public:
    using Var = int;

    struct Node {
        Shape shape;
        std::vector<double> val;
        std::vector<double> grad;
        std::function<void(Tape&, const Node&)> back; // null for leaves
        Param* param = nullptr; // set for trainable leaves
    };

    Var leaf(int rows, int cols, const std::vector<double>& values) {
        if (static_cast<int>(values.size()) != rows * cols)
            throw std::invalid_argument("Tape::leaf: value count does not match shape");
        return push(Shape{rows, cols}, values, nullptr, nullptr);
    }

    Var leaf(const Matrix& m) { return leaf(m.rows, m.cols, m.data); }

    Var scalar(double v) { return leaf(1, 1, {v}); }

    Var zeros(int rows, int cols) {
        return push(Shape{rows, cols}, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0),
                    nullptr, nullptr);
    }

    // Trainable leaf: gradients accumulate into p.grad during backward.
    Var param(Param& p) {
        return push(p.shape, p.value, nullptr, &p);
    }

    // Frozen leaf: current param values, no gradient flow recorded.
    Var frozen(const Param& p) {
        return push(p.shape, p.value, nullptr, nullptr);
    }

    const Shape& shape(Var v) const { return nodes_[v].shape; }
    const std::vector<double>& val(Var v) const { return nodes_[v].val; }
    const std::vector<double>& grad(Var v) const { return nodes_[v].grad; }
    double scalar_val(Var v) const { return nodes_[v].val[0]; }

    // ---- core ops ----

    Var matmul(Var a, Var b) {
        const Shape& sa = nodes_[a].shape;
        const Shape& sb = nodes_[b].shape;
        if (sa.cols != sb.rows)
            throw std::invalid_argument("matmul: inner dims " + sa.str() + " vs " + sb.str());
        int n = sa.rows, k = sa.cols, m = sb.cols;
        std::vector<double> out(static_cast<std::size_t>(n) * m, 0.0);
        mm(nodes_[a].val.data(), nodes_[b].val.data(), out.data(), n, k, m);
        return push(Shape{n, m}, std::move(out),
                    [a, b, n, k, m](Tape& t, const Node& self) {
                        // dA += dC * B^T ; dB += A^T * dC
                        const auto& A = t.nodes_[a].val;
                        const auto& B = t.nodes_[b].val;
                        auto& dA = t.nodes_[a].grad;
                        auto& dB = t.nodes_[b].grad;
                        const auto& dC = self.grad;
                        for (int i = 0; i < n; ++i)
                            for (int j = 0; j < m; ++j) {
                                double d = dC[static_cast<std::size_t>(i) * m + j];
                                if (d == 0.0) continue;
                                for (int p = 0; p < k; ++p) {
                                    dA[static_cast<std::size_t>(i) * k + p] += d * B[static_cast<std::size_t>(p) * m + j];
                                    dB[static_cast<std::size_t>(p) * m + j] += d * A[static_cast<std::size_t>(i) * k + p];
                                }
                            }
                    });
    }

    Var add(Var a, Var b) {
        require_same_shape(nodes_[a].shape, nodes_[b].shape, "add");
        std::vector<double> out(nodes_[a].val);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += nodes_[b].val[i];
        return push(nodes_[a].shape, std::move(out),
                    [a, b](Tape& t, const Node& self) {
                        for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            t.nodes_[a].grad[i] += self.grad[i];
                            t.nodes_[b].grad[i] += self.grad[i];
                        }
                    });
    }

    Var scalar_mul(Var a, double c) {
        std::vector<double> out(nodes_[a].val);
        for (double& v : out) v *= c;
        return push(nodes_[a].shape, std::move(out),
                    [a, c](Tape& t, const Node& self) {
                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                            t.nodes_[a].grad[i] += c * self.grad[i];
                    });
    }

    Var sub(Var a, Var b) { return add(a, scalar_mul(b, -1.0)); }

    // Multiply a matrix by a 1x1 tape scalar (used for (1+eps)*X).
    Var scale_by_scalar(Var m, Var s) {
        if (!(nodes_[s].shape == Shape{1, 1}))
            throw std::invalid_argument("scale_by_scalar: scalar operand must be 1x1, got " + nodes_[s].shape.str());
        double c = nodes_[s].val[0];
        std::vector<double> out(nodes_[m].val);
        for (double& v : out) v *= c;
        return push(nodes_[m].shape, std::move(out),
                    [m, s, c](Tape& t, const Node& self) {
                        const auto& mv = t.nodes_[m].val;
                        double ds = 0.0;
                        for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            t.nodes_[m].grad[i] += c * self.grad[i];
                            ds += self.grad[i] * mv[i];
                        }
                        t.nodes_[s].grad[0] += ds;
                    });
    }

    // Row-wise scaling: out[i,:] = m[i,:] * w[i], w is n x 1.
    Var scale_rows(Var m, Var w) {
        const Shape& sm = nodes_[m].shape;
        const Shape& sw = nodes_[w].shape;
        if (sw.cols != 1 || sw.rows != sm.rows)
            throw std::invalid_argument("scale_rows: weight shape " + sw.str() + " vs matrix " + sm.str());
        std::vector<double> out(nodes_[m].val);
        for (int i = 0; i < sm.rows; ++i) {
            double c = nodes_[w].val[i];
            for (int j = 0; j < sm.cols; ++j) out[static_cast<std::size_t>(i) * sm.cols + j] *= c;
        }
        return push(sm, std::move(out),
                    [m, w](Tape& t, const Node& self) {
                        const Shape& sm2 = t.nodes_[m].shape;
                        const auto& mv = t.nodes_[m].val;
                        const auto& wv = t.nodes_[w].val;
                        for (int i = 0; i < sm2.rows; ++i) {
                            double dw = 0.0;
                            for (int j = 0; j < sm2.cols; ++j) {
                                std::size_t idx = static_cast<std::size_t>(i) * sm2.cols + j;
                                t.nodes_[m].grad[idx] += wv[i] * self.grad[idx];
                                dw += self.grad[idx] * mv[idx];
                            }
                            t.nodes_[w].grad[i] += dw;
                        }
                    });
    }

    // Broadcast-add a 1 x c row to every row of an n x c matrix.
    Var add_row(Var m, Var row) {
        const Shape& sm = nodes_[m].shape;
        const Shape& sr = nodes_[row].shape;
        if (sr.rows != 1 || sr.cols != sm.cols)
            throw std::invalid_argument("add_row: row shape " + sr.str() + " vs matrix " + sm.str());
        std::vector<double> out(nodes_[m].val);
        for (int i = 0; i < sm.rows; ++i)
            for (int j = 0; j < sm.cols; ++j)
                out[static_cast<std::size_t>(i) * sm.cols + j] += nodes_[row].val[j];
        return push(sm, std::move(out),
                    [m, row](Tape& t, const Node& self) {
                        const Shape& sm2 = t.nodes_[m].shape;
                        for (int i = 0; i < sm2.rows; ++i)
                            for (int j = 0; j < sm2.cols; ++j) {
                                std::size_t idx = static_cast<std::size_t>(i) * sm2.cols + j;
                                t.nodes_[m].grad[idx] += self.grad[idx];
                                t.nodes_[row].grad[j] += self.grad[idx];
                            }
                    });
    }

    Var row_sum(Var m) { return row_reduce(m, false); }
    Var row_mean(Var m) { return row_reduce(m, true); }

    Var relu(Var a) {
        std::vector<double> out(nodes_[a].val);
        for (double& v : out) v = v > 0.0 ? v : 0.0;
        return push(nodes_[a].shape, std::move(out),
                    [a](Tape& t, const Node& self) {
                        const auto& av = t.nodes_[a].val;
                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                            if (av[i] > 0.0) t.nodes_[a].grad[i] += self.grad[i];
                    });
    }

    Var sigmoid(Var a) {
        std::vector<double> out(nodes_[a].val);
        for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
        Var r = push(nodes_[a].shape, std::move(out),
                     [a](Tape& t, const Node& self) {
                         for (std::size_t i = 0; i < self.grad.size(); ++i) {
                             double s = self.val[i];
                             t.nodes_[a].grad[i] += self.grad[i] * s * (1.0 - s);
                         }
                     });
        return r;
    }

    Var abs(Var a) {
        std::vector<double> out(nodes_[a].val);
        for (double& v : out) v = std::fabs(v);
        return push(nodes_[a].shape, std::move(out),
                    [a](Tape& t, const Node& self) {
                        const auto& av = t.nodes_[a].val;
                        for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
                            t.nodes_[a].grad[i] += s * self.grad[i];
                        }
                    });
    }

    Var concat_cols(Var a, Var b) {
        const Shape& sa = nodes_[a].shape;
        const Shape& sb = nodes_[b].shape;
        if (sa.rows != sb.rows)
            throw std::invalid_argument("concat_cols: row mismatch " + sa.str() + " vs " + sb.str());
        Shape so{sa.rows, sa.cols + sb.cols};
        std::vector<double> out(static_cast<std::size_t>(so.rows) * so.cols);
        for (int i = 0; i < sa.rows; ++i) {
            for (int j = 0; j < sa.cols; ++j)
                out[static_cast<std::size_t>(i) * so.cols + j] = nodes_[a].val[static_cast<std::size_t>(i) * sa.cols + j];
            for (int j = 0; j < sb.cols; ++j)
                out[static_cast<std::size_t>(i) * so.cols + sa.cols + j] = nodes_[b].val[static_cast<std::size_t>(i) * sb.cols + j];
        }
        return push(so, std::move(out),
                    [a, b](Tape& t, const Node& self) {
                        const Shape& sa2 = t.nodes_[a].shape;
                        const Shape& sb2 = t.nodes_[b].shape;
                        int oc = sa2.cols + sb2.cols;
                        for (int i = 0; i < sa2.rows; ++i) {
                            for (int j = 0; j < sa2.cols; ++j)
                                t.nodes_[a].grad[static_cast<std::size_t>(i) * sa2.cols + j] +=
                                    self.grad[static_cast<std::size_t>(i) * oc + j];
                            for (int j = 0; j < sb2.cols; ++j)
                                t.nodes_[b].grad[static_cast<std::size_t>(i) * sb2.cols + j] +=
                                    self.grad[static_cast<std::size_t>(i) * oc + sa2.cols + j];
                        }
                    });
    }

    Var gather_rows(Var m, std::vector<int> idx) {
        const Shape& sm = nodes_[m].shape;
        for (int i : idx)
            if (i < 0 || i >= sm.rows)
                throw std::invalid_argument("gather_rows: index out of range");
        Shape so{static_cast<int>(idx.size()), sm.cols};
        std::vector<double> out(static_cast<std::size_t>(so.rows) * so.cols);
        for (int r = 0; r < so.rows; ++r)
            std::copy_n(nodes_[m].val.begin() + static_cast<std::size_t>(idx[r]) * sm.cols, sm.cols,
                        out.begin() + static_cast<std::size_t>(r) * sm.cols);
        return push(so, std::move(out),
                    [m, idx = std::move(idx)](Tape& t, const Node& self) {
                        int c = t.nodes_[m].shape.cols;
                        for (std::size_t r = 0; r < idx.size(); ++r)
                            for (int j = 0; j < c; ++j)
                                t.nodes_[m].grad[static_cast<std::size_t>(idx[r]) * c + j] +=
                                    self.grad[r * c + j];
                    });
    }

    // out[dst[r], :] += src[r, :] with out having out_rows rows.
    Var scatter_add_rows(Var src, std::vector<int> dst, int out_rows) {
        const Shape& ss = nodes_[src].shape;
        if (static_cast<int>(dst.size()) != ss.rows)
            throw std::invalid_argument("scatter_add_rows: index count != src rows");
        for (int i : dst)
            if (i < 0 || i >= out_rows)
                throw std::invalid_argument("scatter_add_rows: index out of range");
        Shape so{out_rows, ss.cols};
        std::vector<double> out(static_cast<std::size_t>(so.rows) * so.cols, 0.0);
        for (int r = 0; r < ss.rows; ++r)
            for (int j = 0; j < ss.cols; ++j)
                out[static_cast<std::size_t>(dst[r]) * ss.cols + j] +=
                    nodes_[src].val[static_cast<std::size_t>(r) * ss.cols + j];
        return push(so, std::move(out),
                    [src, dst = std::move(dst)](Tape& t, const Node& self) {
                        int c = t.nodes_[src].shape.cols;
                        for (std::size_t r = 0; r < dst.size(); ++r)
                            for (int j = 0; j < c; ++j)
                                t.nodes_[src].grad[r * c + j] +=
                                    self.grad[static_cast<std::size_t>(dst[r]) * c + j];
                    });
    }

    // Cross-entropy of a single-row logit vector against an integer class.
    Var softmax_cross_entropy(Var logits, int target) {
        const Shape& s = nodes_[logits].shape;
        if (s.rows != 1)
            throw std::invalid_argument("softmax_cross_entropy: expected 1-row logits, got " + s.str());
        if (target < 0 || target >= s.cols)
            throw std::invalid_argument("softmax_cross_entropy: target out of range");
        const auto& z = nodes_[logits].val;
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double denom = 0.0;
        for (double v : z) denom += std::exp(v - zmax);
        double loss = std::log(denom) - (z[target] - zmax);
        return push(Shape{1, 1}, {loss},
                    [logits, target, zmax, denom](Tape& t, const Node& self) {
                        const auto& zv = t.nodes_[logits].val;
                        double d = self.grad[0];
                        for (std::size_t j = 0; j < zv.size(); ++j) {
                            double p = std::exp(zv[j] - zmax) / denom;
                            t.nodes_[logits].grad[j] += d * (p - (static_cast<int>(j) == target ? 1.0 : 0.0));
                        }
                    });
    }

    // Sum of absolute values, subgradient sign(0) = 0.
    Var l1_norm(Var a) {
        double s = 0.0;
        for (double v : nodes_[a].val) s += std::fabs(v);
        return push(Shape{1, 1}, {s},
                    [a](Tape& t, const Node& self) {
                        const auto& av = t.nodes_[a].val;
                        double d = self.grad[0];
                        for (std::size_t i = 0; i < av.size(); ++i) {
                            double sg = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
                            t.nodes_[a].grad[i] += d * sg;
                        }
                    });
    }

    // Forward: 1 where x > t else 0 (tie at x == t maps to 0).
    // Backward: identity pass-through of the incoming gradient.
    Var straight_through_threshold(Var a, double t) {
        if (!(t > 0.0 && t < 1.0))
            throw std::invalid_argument("straight_through_threshold: t must be in (0,1)");
        std::vector<double> out(nodes_[a].val);
        for (double& v : out) v = v > t ? 1.0 : 0.0;
        return push(nodes_[a].shape, std::move(out),
                    [a](Tape& t2, const Node& self) {
                        for (std::size_t i = 0; i < self.grad.size(); ++i)
                            t2.nodes_[a].grad[i] += self.grad[i];
                    });
    }

    Var mean_all(Var a) {
        double s = 0.0;
        for (double v : nodes_[a].val) s += v;
        int n = nodes_[a].shape.size();
        return push(Shape{1, 1}, {s / n},
                    [a, n](Tape& t, const Node& self) {
                        double d = self.grad[0] / n;
                        for (double& g : t.nodes_[a].grad) g += d;
                    });
    }

    // ---- backward ----

    void backward(Var loss) {
        if (!(nodes_[loss].shape == Shape{1, 1}))
            throw std::invalid_argument("backward: loss must be scalar, got " + nodes_[loss].shape.str());
        nodes_[loss].grad[0] = 1.0;
        for (int i = loss; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.back) n.back(*this, n);
            if (n.param)
                for (std::size_t k = 0; k < n.grad.size(); ++k) n.param->grad[k] += n.grad[k];
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    Var push(Shape s, std::vector<double> val, std::function<void(Tape&, const Node&)> back,
             Param* p = nullptr) {
        Node n;
        n.shape = s;
        n.val = std::move(val);
        n.grad.assign(n.val.size(), 0.0);
        n.back = std::move(back);
        n.param = p;
        nodes_.push_back(std::move(n));
        return static_cast<Var>(nodes_.size() - 1);
    }

    Var push(Shape s, std::vector<double> val, std::nullptr_t, Param* p) {
        return push(s, std::move(val), std::function<void(Tape&, const Node&)>(), p);
    }

    Var row_reduce(Var m, bool mean) {
        const Shape& sm = nodes_[m].shape;
        std::vector<double> out(sm.cols, 0.0);
        for (int i = 0; i < sm.rows; ++i)
            for (int j = 0; j < sm.cols; ++j)
                out[j] += nodes_[m].val[static_cast<std::size_t>(i) * sm.cols + j];
        double scale = mean ? 1.0 / sm.rows : 1.0;
        for (double& v : out) v *= scale;
        return push(Shape{1, sm.cols}, std::move(out),
                    [m, scale](Tape& t, const Node& self) {
                        const Shape& sm2 = t.nodes_[m].shape;
                        for (int i = 0; i < sm2.rows; ++i)
                            for (int j = 0; j < sm2.cols; ++j)
                                t.nodes_[m].grad[static_cast<std::size_t>(i) * sm2.cols + j] +=
                                    scale * self.grad[j];
                    });
    }

    static void mm(const double* a, const double* b, double* c, int n, int k, int m) {
        // ikj order, c pre-zeroed
        for (int i = 0; i < n; ++i) {
            const double* ai = a + static_cast<std::size_t>(i) * k;
            double* ci = c + static_cast<std::size_t>(i) * m;
            for (int p = 0; p < k; ++p) {
                double av = ai[p];
                if (av == 0.0) continue;
                const double* bp = b + static_cast<std::size_t>(p) * m;
                for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
            }
        }
    }

    std::vector<Node> nodes_;
};

} // namespace sgnnx::ad
