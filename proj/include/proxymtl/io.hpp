#pragma once
// Bundle directory format:
//   manifest.json  {"p": P, "tasks": [{"s": "s_1.csv", "sigma": "sigma_1.csv",
//                   "n_discovery": N, "n_proxy": M, "overlap_count": K?}, ...]}
//   matrix CSVs    no header, comma-separated, one row per line, %.17g
//   vectors        single-column CSVs
#include <proxymtl/core.hpp>
#include <json.hpp>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace proxymtl {
namespace io {

namespace fs = std::filesystem;

inline std::string format_double(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_double(std::string_view tok, const std::string& where)
{
    while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw Error(ErrorCode::ParseError, where + ": cannot parse '" + std::string(tok) + "' as a number");
    }
    return v;
}

inline std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::MissingFile, "write failed for " + path.string());
}

inline Matrix parse_csv_matrix(const std::string& text, const std::string& where)
{
    std::vector<double> values;
    Index rows = 0, cols = -1;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        Index c = 0;
        std::size_t start = 0;
        while (true) {
            std::size_t comma = line.find(',', start);
            auto tok = line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start);
            values.push_back(parse_double(tok, where + " row " + std::to_string(rows + 1)));
            ++c;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (cols < 0) cols = c;
        if (c != cols) {
            throw Error(ErrorCode::ParseError, where + ": ragged row " + std::to_string(rows + 1) + " has " +
                                                   std::to_string(c) + " fields, expected " +
                                                   std::to_string(cols));
        }
        ++rows;
    }
    if (rows == 0) throw Error(ErrorCode::ParseError, where + ": empty matrix file");
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
    return m;
}

inline Matrix read_csv_matrix(const fs::path& path)
{
    if (!fs::exists(path)) throw Error(ErrorCode::MissingFile, "missing file " + path.string());
    return parse_csv_matrix(read_text(path), path.string());
}

inline Vector read_csv_vector(const fs::path& path)
{
    Matrix m = read_csv_matrix(path);
    if (m.cols() != 1) {
        throw Error(ErrorCode::DimensionMismatch, path.string() + ": expected a single-column vector, got " +
                                                      std::to_string(m.cols()) + " columns");
    }
    return m.col(0);
}

inline std::string to_csv(const Matrix& m)
{
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 24);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline void write_csv_matrix(const fs::path& path, const Matrix& m) { write_text(path, to_csv(m)); }

/// Accepts either the bundle directory or the manifest file itself.
inline TaskBundle load_bundle(const fs::path& manifest_or_dir)
{
    fs::path manifest = manifest_or_dir;
    if (fs::is_directory(manifest)) manifest /= "manifest.json";
    if (!fs::exists(manifest)) throw Error(ErrorCode::MissingFile, "manifest not found: " + manifest.string());
    const fs::path dir = manifest.parent_path();

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(manifest));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, "manifest " + manifest.string() + ": " + e.what());
    }

    TaskBundle b;
    try {
        b.p = j.at("p").get<Index>();
        for (const auto& jt : j.at("tasks")) {
            TaskSummary t;
            t.s = read_csv_vector(dir / jt.at("s").get<std::string>());
            t.sigma = read_csv_matrix(dir / jt.at("sigma").get<std::string>());
            t.n_discovery = jt.at("n_discovery").get<long>();
            t.n_proxy = jt.at("n_proxy").get<long>();
            if (jt.contains("overlap_count") && !jt.at("overlap_count").is_null())
                t.overlap_count = jt.at("overlap_count").get<long>();
            b.tasks.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, "manifest " + manifest.string() + ": " + e.what());
    }
    if (b.tasks.empty()) throw Error(ErrorCode::ParseError, "manifest lists no tasks");
    return validate_bundle(std::move(b));
}

inline void save_bundle(const TaskBundle& bundle, const fs::path& dir)
{
    fs::create_directories(dir);
    nlohmann::json j;
    j["p"] = bundle.p;
    j["tasks"] = nlohmann::json::array();
    for (std::size_t q = 0; q < bundle.tasks.size(); ++q) {
        const auto& t = bundle.tasks[q];
        const std::string sname = "s_" + std::to_string(q + 1) + ".csv";
        const std::string cname = "sigma_" + std::to_string(q + 1) + ".csv";
        write_csv_matrix(dir / sname, t.s);
        write_csv_matrix(dir / cname, t.sigma);
        nlohmann::json jt;
        jt["s"] = sname;
        jt["sigma"] = cname;
        jt["n_discovery"] = t.n_discovery;
        jt["n_proxy"] = t.n_proxy;
        if (t.overlap_count) jt["overlap_count"] = *t.overlap_count;
        j["tasks"].push_back(std::move(jt));
    }
    write_text(dir / "manifest.json", j.dump(2) + "\n");
}

} // namespace io
} // namespace proxymtl
