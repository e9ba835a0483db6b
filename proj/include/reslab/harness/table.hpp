#pragma once

// Result tables and their CSV dialect: comma separated, '.' decimal point, mandatory
// header, reals with 17 significant digits (exact round trip, no locale).

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace reslab::harness {

inline std::string csv_real(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string csv_int(std::size_t x) { return std::to_string(x); }
inline std::string csv_bool(bool b) { return b ? "true" : "false"; }

struct table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const
    {
        for (std::size_t k = 0; k < columns.size(); ++k)
            if (columns[k] == name) return k;
        throw std::out_of_range("no column '" + name + "'");
    }

    bool has_column(const std::string& name) const
    {
        for (const auto& c : columns)
            if (c == name) return true;
        return false;
    }

    std::string to_csv() const
    {
        auto line = [](const std::vector<std::string>& cells) {
            std::string out;
            for (std::size_t k = 0; k < cells.size(); ++k) {
                if (k) out += ',';
                const auto& c = cells[k];
                if (c.find_first_of(",\"\n") == std::string::npos) {
                    out += c;
                } else {
                    out += '"';
                    for (char ch : c) {
                        if (ch == '"') out += '"';
                        out += ch;
                    }
                    out += '"';
                }
            }
            return out + "\n";
        };
        std::string out = line(columns);
        for (const auto& r : rows) out += line(r);
        return out;
    }
};

inline void write_text(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Append rows to a CSV file, writing the header only when the file is new or empty.
inline void append_csv(const std::string& path, const table& t)
{
    std::ifstream probe(path, std::ios::binary | std::ios::ate);
    const bool fresh = !probe || probe.tellg() == 0;
    probe.close();
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot append to '" + path + "'");
    auto csv = t.to_csv();
    if (!fresh) csv = csv.substr(csv.find('\n') + 1);
    out << csv;
}

}  // namespace reslab::harness
