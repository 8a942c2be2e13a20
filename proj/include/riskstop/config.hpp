#pragma once

#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riskstop/errors.hpp"

namespace riskstop {

/// Line-oriented configuration: `[section]` headers over `key = value`
/// pairs. Repeated keys are kept in order (kernel rows use this). Comments
/// start with '#'.
class Config {
public:
    struct Entry {
        std::string section;
        std::string key;
        std::string value;
    };

    static Config parse(std::string_view text) {
        Config cfg;
        std::string section;
        std::size_t pos = 0;
        int lineno = 0;
        while (pos <= text.size()) {
            const std::size_t eol = text.find('\n', pos);
            std::string_view line =
                text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
            pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
            ++lineno;
            if (const auto hash = line.find('#'); hash != std::string_view::npos)
                line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            Entry e;
            e.section = section;
            e.key = std::string(trim(line.substr(0, eq)));
            e.value = std::string(trim(line.substr(eq + 1)));
            if (e.key.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty key");
            cfg.entries_.push_back(std::move(e));
        }
        return cfg;
    }

    void set(std::string section, std::string key, std::string value) {
        entries_.push_back({std::move(section), std::move(key), std::move(value)});
    }

    std::optional<std::string> get(std::string_view section, std::string_view key) const {
        std::optional<std::string> out;
        for (const Entry& e : entries_)
            if (e.section == section && e.key == key) out = e.value; // last wins
        return out;
    }

    std::vector<std::string> get_all(std::string_view section, std::string_view key) const {
        std::vector<std::string> out;
        for (const Entry& e : entries_)
            if (e.section == section && e.key == key) out.push_back(e.value);
        return out;
    }

    double get_double(std::string_view section, std::string_view key, double fallback) const {
        auto v = get(section, key);
        return v ? to_double(*v, section, key) : fallback;
    }

    double require_double(std::string_view section, std::string_view key) const {
        auto v = get(section, key);
        if (!v)
            throw ConfigError("missing required key " + dotted(section, key));
        return to_double(*v, section, key);
    }

    long get_long(std::string_view section, std::string_view key, long fallback) const {
        auto v = get(section, key);
        if (!v) return fallback;
        const double d = to_double(*v, section, key);
        return (long)d;
    }

    std::string get_string(std::string_view section, std::string_view key,
                           std::string fallback) const {
        auto v = get(section, key);
        return v ? *v : fallback;
    }

    std::vector<double> get_list(std::string_view section, std::string_view key) const {
        auto v = get(section, key);
        if (!v) return {};
        std::vector<double> out;
        std::string_view rest = *v;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = trim(rest.substr(0, comma));
            if (!item.empty()) out.push_back(to_double(item, section, key));
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
        return out;
    }

    /// Canonical dump used for the embedded config hash.
    std::string canonical() const {
        std::string out;
        for (const Entry& e : entries_) {
            out += e.section;
            out += '.';
            out += e.key;
            out += '=';
            out += e.value;
            out += '\n';
        }
        return out;
    }

    /// FNV-1a over the canonical dump, hex encoded.
    std::string hash() const {
        std::uint64_t h = 14695981039346656037ULL;
        for (unsigned char c : canonical()) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        char buf[17];
        static const char* hex = "0123456789abcdef";
        for (int i = 15; i >= 0; --i) {
            buf[i] = hex[h & 0xF];
            h >>= 4;
        }
        buf[16] = '\0';
        return buf;
    }

    const std::vector<Entry>& entries() const { return entries_; }

    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        return s;
    }

private:
    static std::string dotted(std::string_view section, std::string_view key) {
        return std::string(section) + "." + std::string(key);
    }
    static double to_double(std::string_view s, std::string_view section, std::string_view key) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw ConfigError("bad number '" + std::string(s) + "' for " + dotted(section, key));
        return v;
    }

    std::vector<Entry> entries_;
};

} // namespace riskstop
