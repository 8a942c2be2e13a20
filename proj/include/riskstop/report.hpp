#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "riskstop/errors.hpp"
#include "riskstop/numeric.hpp"
#include "riskstop/state.hpp"

namespace riskstop {

/// Shortest decimal form that round-trips; infinities spelled out so CSV
/// consumers see them.
inline std::string format_number(double v) {
    if (v == kInf) return "inf";
    if (v == kNegInf) return "-inf";
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

/// Line-oriented `key = value` report with section headers, built in memory
/// and written in one piece so outputs are byte-deterministic.
class ReportWriter {
public:
    void section(const std::string& name) {
        if (!body_.empty()) body_ += '\n';
        body_ += '[' + name + "]\n";
    }
    void kv(const std::string& key, const std::string& value) {
        body_ += key + " = " + value + '\n';
    }
    void kv(const std::string& key, double value) { kv(key, format_number(value)); }
    void kv(const std::string& key, long value) { kv(key, std::to_string(value)); }
    void kv(const std::string& key, bool value) { kv(key, std::string(value ? "true" : "false")); }

    const std::string& text() const { return body_; }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << body_;
    }

private:
    std::string body_;
};

/// CSV with a fixed header; cells are preformatted strings.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != header_.size())
            throw InvalidParams("csv row width mismatch");
        rows_.push_back(cells);
    }

    void write(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write " + path.string());
        out << join(header_) << '\n';
        for (const auto& r : rows_) out << join(r) << '\n';
    }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += cells[i];
        }
        return line;
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace riskstop
