#pragma once

// Text formats: numeric CSV tables (FRFs, time series, traces) written with
// 17 significant digits, and JSON run configuration.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "frfhb/data.hpp"
#include "frfhb/errors.hpp"
#include "frfhb/modal.hpp"
#include "frfhb/signal.hpp"

namespace frfhb {

using Json = nlohmann::ordered_json;

/// Shortest text with 17 significant digits, independent of the C locale.
inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where)
{
    const char* first = s.data();
    const char* last = s.data() + s.size();
    while (first < last && (*first == ' ' || *first == '\t'))
        ++first;
    while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r'))
        --last;
    if (first < last && *first == '+')
        ++first;
    double v = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw DataError(where + ": cannot parse '" + s + "' as a number");
    return v;
}

/// Column-named numeric table.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    }

    [[nodiscard]] std::size_t column(const std::string& name, const std::string& source) const
    {
        const auto c = find(name);
        if (!c)
            throw DataError(source + ": missing column '" + name + "'");
        return *c;
    }

    [[nodiscard]] std::vector<double> values(std::size_t col) const
    {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows)
            out.push_back(r[col]);
        return out;
    }
};

namespace detail {

inline std::string quote_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> split_csv_line(const std::string& line, const std::string& where)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    if (quoted)
        throw DataError(where + ": unterminated quoted field");
    out.push_back(std::move(cur));
    return out;
}

inline void ensure_parent_directory(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec)
            throw DataError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
    }
}

} // namespace detail

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    detail::ensure_parent_directory(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out)
        throw DataError("failed writing '" + path.string() + "'");
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string to_csv(const CsvTable& table)
{
    std::string out;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c > 0)
            out += ',';
        out += detail::quote_field(table.header[c]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw DataError("csv row has " + std::to_string(row.size()) + " fields, header has " +
                            std::to_string(table.header.size()));
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0)
                out += ',';
            out += format_double(row[c]);
        }
        out += '\n';
    }
    return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& source)
{
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const std::string where = source + ":" + std::to_string(line_no);
        auto fields = detail::split_csv_line(line, where);
        if (!have_header) {
            if (line_no == 1 && !fields.empty() && fields[0].size() >= 3 && fields[0].compare(0, 3, "\xEF\xBB\xBF") == 0)
                fields[0].erase(0, 3);
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields)
            row.push_back(parse_double(f, where));
        t.rows.push_back(std::move(row));
    }
    if (!have_header)
        throw DataError(source + ": empty file");
    return t;
}

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_text(path, to_csv(table)); }

inline CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

/// FRF file: `freq_hz,real[,imag][,temperature_c]`. Observations are stored
/// in rad/s in memory and in Hz on disk.
inline CsvTable frf_table(const FrfDomain& domain, std::span<const double> imag = {})
{
    if (!imag.empty() && imag.size() != domain.points.size())
        throw DataError("imaginary part length does not match the FRF");
    CsvTable t;
    t.header = {"freq_hz", "real"};
    if (!imag.empty())
        t.header.push_back("imag");
    if (domain.temperature_c)
        t.header.push_back("temperature_c");
    for (std::size_t i = 0; i < domain.points.size(); ++i) {
        std::vector<double> row{rad_to_hz(domain.points[i].omega), domain.points[i].value};
        if (!imag.empty())
            row.push_back(imag[i]);
        if (domain.temperature_c)
            row.push_back(*domain.temperature_c);
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_frf_csv(const std::filesystem::path& path, const FrfDomain& domain, std::span<const double> imag = {})
{
    write_csv(path, frf_table(domain, imag));
}

inline FrfDomain frf_from_table(const CsvTable& t, const std::string& name, const std::string& source)
{
    const std::size_t cf = t.column("freq_hz", source);
    const std::size_t cr = t.column("real", source);
    const auto ct = t.find("temperature_c");
    FrfDomain d;
    d.name = name;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        if (!(r[cf] >= 0.0) || !std::isfinite(r[cf]) || !std::isfinite(r[cr]))
            throw DataError(source + ": row " + std::to_string(i + 1) + " has an invalid frequency or value");
        if (i > 0 && !(r[cf] > t.rows[i - 1][cf]))
            throw DataError(source + ": frequencies must be strictly increasing");
        d.points.push_back({hz_to_rad(r[cf]), r[cr]});
        if (ct) {
            const double temp = r[*ct];
            if (!std::isfinite(temp))
                throw DataError(source + ": non-finite temperature");
            if (d.temperature_c && *d.temperature_c != temp)
                throw DataError(source + ": temperature must be constant within one file");
            d.temperature_c = temp;
        }
    }
    if (d.points.empty())
        throw DataError(source + ": no FRF rows");
    return d;
}

/// Reads one FRF file; the domain is named after the file stem.
inline FrfDomain read_frf_csv(const std::filesystem::path& path)
{
    return frf_from_table(read_csv(path), path.stem().string(), path.string());
}

/// Time-series file: `time_s,value` with uniform sampling.
inline void write_time_series_csv(const std::filesystem::path& path, const TimeSeries& ts)
{
    CsvTable t;
    t.header = {"time_s", "value"};
    t.rows.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i)
        t.rows.push_back({static_cast<double>(i) / ts.sample_rate, ts.samples[i]});
    write_csv(path, t);
}

inline TimeSeries read_time_series_csv(const std::filesystem::path& path)
{
    const auto t = read_csv(path);
    const std::string src = path.string();
    const std::size_t ct = t.column("time_s", src);
    const std::size_t cv = t.column("value", src);
    if (t.rows.size() < 2)
        throw DataError(src + ": time series needs at least two samples");
    const double t0 = t.rows.front()[ct];
    const double span = t.rows.back()[ct] - t0;
    const double dt = span / static_cast<double>(t.rows.size() - 1);
    if (!(dt > 0.0))
        throw DataError(src + ": time stamps must increase");
    std::vector<double> samples;
    samples.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double expected = t0 + dt * static_cast<double>(i);
        if (std::abs(t.rows[i][ct] - expected) > 1e-6 * dt + 1e-12 * std::abs(expected))
            throw DataError(src + ": row " + std::to_string(i + 1) + " breaks uniform sampling");
        if (!std::isfinite(t.rows[i][cv]))
            throw DataError(src + ": row " + std::to_string(i + 1) + " has a non-finite value");
        samples.push_back(t.rows[i][cv]);
    }
    return {std::move(samples), 1.0 / dt};
}

inline Json read_json(const std::filesystem::path& path)
{
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

} // namespace frfhb
