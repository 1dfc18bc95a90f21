#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tfusion {

// Flat `key = value` configuration files. `#` starts a comment, blank lines
// are ignored, lists are bracketed comma-separated numbers. Repeated keys
// accumulate in file order (used for scene primitives).

struct ConfigError : std::runtime_error {
    int line;
    ConfigError(int line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg),
          line(line_) {}
};

class Config {
public:
    Config() = default;

    static Config parse(std::istream& in) {
        Config cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            if (hash != std::string::npos)
                line.erase(hash);
            std::string trimmed = trim(line);
            if (trimmed.empty())
                continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError(lineno, "expected `key = value`");
            std::string key = trim(trimmed.substr(0, eq));
            std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError(lineno, "empty key");
            if (value.empty())
                throw ConfigError(lineno, "empty value for key `" + key + "`");
            cfg.entries_.push_back({key, value, lineno});
        }
        return cfg;
    }

    static Config parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static Config parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw std::runtime_error("cannot open config: " + path);
        return parse(in);
    }

    bool has(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key)
                return true;
        return false;
    }

    std::string get_string(const std::string& key) const {
        return find(key).value;
    }

    std::string get_string(const std::string& key,
                           const std::string& fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    double get_double(const std::string& key) const {
        const Entry& e = find(key);
        return parse_double(e.value, e.line);
    }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    std::int64_t get_int(const std::string& key) const {
        const Entry& e = find(key);
        try {
            std::size_t pos = 0;
            std::int64_t v = std::stoll(e.value, &pos);
            if (pos != e.value.size())
                throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(e.line, "expected integer for `" + key + "`, got `" +
                                          e.value + "`");
        }
    }

    std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    std::uint64_t get_uint(const std::string& key) const {
        const Entry& e = find(key);
        try {
            std::size_t pos = 0;
            std::uint64_t v = std::stoull(e.value, &pos);
            if (pos != e.value.size() || e.value[0] == '-')
                throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(e.line, "expected unsigned integer for `" + key +
                                          "`, got `" + e.value + "`");
        }
    }

    std::uint64_t get_uint(const std::string& key,
                           std::uint64_t fallback) const {
        return has(key) ? get_uint(key) : fallback;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key))
            return fallback;
        const Entry& e = find(key);
        if (e.value == "true" || e.value == "1")
            return true;
        if (e.value == "false" || e.value == "0")
            return false;
        throw ConfigError(e.line, "expected true/false for `" + key + "`");
    }

    std::vector<double> get_list(const std::string& key) const {
        const Entry& e = find(key);
        return parse_list(e.value, e.line, key);
    }

    // All occurrences of a repeated list key, in file order.
    std::vector<std::vector<double>> get_lists(const std::string& key) const {
        std::vector<std::vector<double>> out;
        for (const auto& e : entries_)
            if (e.key == key)
                out.push_back(parse_list(e.value, e.line, key));
        return out;
    }

    struct Entry {
        std::string key;
        std::string value;
        int line;
    };

    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;

    static std::string trim(const std::string& s) {
        auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            return "";
        auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }

    const Entry& find(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key)
                return e;
        throw ConfigError(0, "missing required key `" + key + "`");
    }

    static double parse_double(const std::string& s, int line) {
        try {
            std::size_t pos = 0;
            double v = std::stod(s, &pos);
            if (pos != s.size())
                throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(line, "expected number, got `" + s + "`");
        }
    }

    static std::vector<double> parse_list(const std::string& s, int line,
                                          const std::string& key) {
        if (s.size() < 2 || s.front() != '[' || s.back() != ']')
            throw ConfigError(line, "expected bracketed list for `" + key + "`");
        std::vector<double> out;
        std::string body = s.substr(1, s.size() - 2);
        std::istringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::string t = trim(item);
            if (t.empty())
                throw ConfigError(line, "empty list element in `" + key + "`");
            out.push_back(parse_double(t, line));
        }
        if (out.empty())
            throw ConfigError(line, "empty list for `" + key + "`");
        return out;
    }
};

} // namespace tfusion
