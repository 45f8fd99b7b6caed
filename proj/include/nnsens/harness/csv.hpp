// Minimal CSV writer with locale-independent, shortest round-trip numbers.
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "nnsens/common.hpp"

namespace nnsens::harness {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class CsvRow {
public:
    CsvRow& add(std::string_view s) {
        cells_.emplace_back(s);
        return *this;
    }
    CsvRow& add(const char* s) { return add(std::string_view(s)); }
    CsvRow& add(const std::string& s) { return add(std::string_view(s)); }
    CsvRow& add(double v) { return add(format_number(v)); }
    CsvRow& add(float v) { return add(static_cast<double>(v)); }
    template <typename I>
        requires std::is_integral_v<I>
    CsvRow& add(I v) {
        if constexpr (std::is_same_v<I, bool>)
            return add(std::string_view(v ? "1" : "0"));
        else
            return add(std::string_view(std::to_string(v)));
    }
    CsvRow& extend(const CsvRow& other) {
        cells_.insert(cells_.end(), other.cells_.begin(), other.cells_.end());
        return *this;
    }

    const std::vector<std::string>& cells() const { return cells_; }

    std::string str() const {
        std::string line;
        for (std::size_t i = 0; i < cells_.size(); ++i) {
            if (i) line += ',';
            line += quote(cells_[i]);
        }
        return line;
    }

    static std::string quote(const std::string& cell) {
        if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
        std::string quoted = "\"";
        for (char c : cell) {
            if (c == '"') quoted += '"';
            quoted += c;
        }
        return quoted + "\"";
    }

private:
    std::vector<std::string> cells_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;

    void write(std::ostream& out) const {
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << CsvRow::quote(header[i]);
        out << '\n';
        for (const auto& r : rows) out << r.str() << '\n';
    }

    void save(const std::string& path) const {
        const auto parent = std::filesystem::path(path).parent_path();
        std::error_code ec;
        if (!parent.empty()) std::filesystem::create_directories(parent, ec);
        std::ofstream out(path, std::ios::binary);
        require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path);
        write(out);
        require(static_cast<bool>(out), ErrorKind::Io, "failed writing " + path);
    }
};

/// Parses a CSV produced by CsvTable (quoted cells supported).
inline CsvTable read_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        CsvRow row;
        std::string cell;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cell += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                row.add(std::string_view(cell));
                cell.clear();
            } else {
                cell += c;
            }
        }
        row.add(std::string_view(cell));
        if (first) {
            t.header = row.cells();
            first = false;
        } else {
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

}  // namespace nnsens::harness
