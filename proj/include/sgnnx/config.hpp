#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgnnx {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Declarative run configuration: one "key = value" per line, '#' starts
// a comment. Reads are tracked so effective settings (including
// defaults) can be echoed into run metadata, and unknown keys can be
// rejected.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot read config file " + path);
        Config c;
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
            std::string key = trim(trimmed.substr(0, eq));
            std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
            c.values_[key] = value;
        }
        return c;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key) {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing required config key '" + key + "'");
        used_.insert(key);
        effective_[key] = it->second;
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& def) {
        used_.insert(key);
        auto it = values_.find(key);
        std::string v = it == values_.end() ? def : it->second;
        effective_[key] = v;
        return v;
    }

    int get_int(const std::string& key, int def) { return parse_int(key, get_string(key, std::to_string(def))); }
    int get_int(const std::string& key) { return parse_int(key, get_string(key)); }

    double get_double(const std::string& key, double def) {
        std::ostringstream os;
        os.precision(17);
        os << def;
        return parse_double(key, get_string(key, os.str()));
    }

    bool get_bool(const std::string& key, bool def) {
        std::string v = get_string(key, def ? "true" : "false");
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
    }

    std::uint64_t get_seed(const std::string& key, std::uint64_t def) {
        return static_cast<std::uint64_t>(std::stoull(get_string(key, std::to_string(def))));
    }

    // Any key present in the file but never requested.
    std::vector<std::string> unknown_keys() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : values_)
            if (!used_.count(k)) out.push_back(k);
        return out;
    }

    // All settings the run actually used, defaults included.
    const std::map<std::string, std::string>& effective() const { return effective_; }

    void write_metadata(const std::string& path,
                        const std::vector<std::pair<std::string, std::string>>& extra = {}) const {
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write metadata file " + path);
        for (const auto& [k, v] : effective_) f << k << " = " << v << "\n";
        for (const auto& [k, v] : extra) f << k << " = " << v << "\n";
    }

    static std::map<std::string, std::string> read_metadata(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot read metadata file " + path);
        std::map<std::string, std::string> out;
        std::string line;
        while (std::getline(f, line)) {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
        }
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        std::size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    static int parse_int(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            int x = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': expected integer, got '" + v + "'");
        }
    }

    static double parse_double(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
        }
    }

    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> effective_;
    std::set<std::string> used_;
};

} // namespace sgnnx
