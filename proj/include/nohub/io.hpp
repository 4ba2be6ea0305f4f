#pragma once

#include "nohub/core.hpp"

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace nohub {

enum class FileFormat { Csv, Binary };

/// `.csv` paths are text, everything else is the NHUB binary container.
inline FileFormat detect_format(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".csv") return FileFormat::Csv;
    return FileFormat::Binary;
}

struct FeatureFile {
    Matrix x;
    std::vector<std::int64_t> labels;
    bool has_labels = false;
};

/// Shortest representation that round-trips through a double exactly.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& token, const std::string& context) {
    double v = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end)
        throw IoError(context + ": cannot parse number '" + token + "'");
    return v;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline std::ofstream open_output(const std::string& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline std::ifstream open_input(const std::string& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return in;
}

}  // namespace detail

/// CSV feature schema: optional '#' comment lines, header f0,...,f{k-1},label,
/// label -1 on unlabeled rows. Floats use shortest round-trip formatting.
inline void write_features_csv(const std::string& path, const Matrix& x,
                               const std::vector<std::int64_t>* labels,
                               const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path, false);
    for (const auto& c : comments) out << "# " << c << "\n";
    for (Index j = 0; j < x.cols(); ++j) out << "f" << j << ",";
    out << "label\n";
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) out << format_double(x(i, j)) << ",";
        out << (labels ? (*labels)[static_cast<std::size_t>(i)] : -1) << "\n";
    }
    if (!out) throw IoError("write failed on '" + path + "'");
}

inline FeatureFile read_features_csv(const std::string& path) {
    auto in = detail::open_input(path, false);
    std::string line;
    std::size_t line_no = 0;
    auto next_data_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            return true;
        }
        return false;
    };

    if (!next_data_line()) throw IoError(path + ": missing header line");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header.back() != "label")
        throw IoError(path + ":" + std::to_string(line_no) +
                      ": header must be f0,...,f{k-1},label");
    const auto k = static_cast<Index>(header.size() - 1);
    for (Index j = 0; j < k; ++j) {
        if (header[static_cast<std::size_t>(j)] != "f" + std::to_string(j))
            throw IoError(path + ":" + std::to_string(line_no) + ": unexpected column '" +
                          header[static_cast<std::size_t>(j)] + "'");
    }

    std::vector<double> values;
    std::vector<std::int64_t> labels;
    while (next_data_line()) {
        const auto fields = detail::split_csv_line(line);
        if (static_cast<Index>(fields.size()) != k + 1)
            throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                          std::to_string(k + 1) + " fields, got " + std::to_string(fields.size()));
        const std::string context = path + ":" + std::to_string(line_no);
        for (Index j = 0; j < k; ++j)
            values.push_back(parse_double(fields[static_cast<std::size_t>(j)], context));
        labels.push_back(
            static_cast<std::int64_t>(parse_double(fields[static_cast<std::size_t>(k)], context)));
    }
    const auto n = static_cast<Index>(labels.size());
    if (n == 0) throw IoError(path + ": no data rows");

    FeatureFile file;
    file.x.resize(n, k);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < k; ++j)
            file.x(i, j) = values[static_cast<std::size_t>(i * k + j)];
    file.labels = std::move(labels);
    file.has_labels = true;
    return file;
}

// Binary container: magic "NHUB", u16 version, u64 n, u64 k, u8 label flag,
// row-major 64-bit little-endian floats, then i64 labels when flagged.
inline void write_features_binary(const std::string& path, const Matrix& x,
                                  const std::vector<std::int64_t>* labels) {
    auto out = detail::open_output(path, true);
    const char magic[4] = {'N', 'H', 'U', 'B'};
    out.write(magic, 4);
    const std::uint16_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t n = static_cast<std::uint64_t>(x.rows());
    const std::uint64_t k = static_cast<std::uint64_t>(x.cols());
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(&k), sizeof(k));
    const std::uint8_t has_labels = labels != nullptr ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&has_labels), sizeof(has_labels));
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.cols(); ++j) {
            const double v = x(i, j);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
    if (labels) {
        for (std::int64_t y : *labels) out.write(reinterpret_cast<const char*>(&y), sizeof(y));
    }
    if (!out) throw IoError("write failed on '" + path + "'");
}

inline FeatureFile read_features_binary(const std::string& path) {
    auto in = detail::open_input(path, true);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "NHUB", 4) != 0)
        throw IoError(path + ": not a NHUB binary file");
    std::uint16_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != 1) throw IoError(path + ": unsupported version " + std::to_string(version));
    std::uint64_t n = 0;
    std::uint64_t k = 0;
    std::uint8_t has_labels = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof(n));
    in.read(reinterpret_cast<char*>(&k), sizeof(k));
    in.read(reinterpret_cast<char*>(&has_labels), sizeof(has_labels));
    if (!in || n == 0 || k == 0) throw IoError(path + ": corrupt header");

    FeatureFile file;
    file.x.resize(static_cast<Index>(n), static_cast<Index>(k));
    for (std::uint64_t i = 0; i < n; ++i) {
        for (std::uint64_t j = 0; j < k; ++j) {
            double v = 0.0;
            in.read(reinterpret_cast<char*>(&v), sizeof(v));
            file.x(static_cast<Index>(i), static_cast<Index>(j)) = v;
        }
    }
    if (has_labels) {
        file.labels.resize(n);
        for (std::uint64_t i = 0; i < n; ++i)
            in.read(reinterpret_cast<char*>(&file.labels[i]), sizeof(std::int64_t));
        file.has_labels = true;
    }
    if (!in) throw IoError(path + ": truncated file");
    return file;
}

inline void write_features(const std::string& path, const Matrix& x,
                           const std::vector<std::int64_t>* labels,
                           const std::vector<std::string>& comments = {}) {
    if (detect_format(path) == FileFormat::Csv)
        write_features_csv(path, x, labels, comments);
    else
        write_features_binary(path, x, labels);
}

inline FeatureFile read_features(const std::string& path) {
    return detect_format(path) == FileFormat::Csv ? read_features_csv(path)
                                                  : read_features_binary(path);
}

struct ResultRow {
    std::string method;
    std::string variant;
    int shots = 0;
    double accuracy_mean = 0.0;
    double accuracy_ci = 0.0;
    double sk_mean = 0.0;
    double ho_mean = 0.0;
    int episodes = 0;
    std::uint64_t seed = 0;
    // Filled by parameter sweeps only; adds trailing param,value columns.
    std::optional<std::pair<std::string, double>> sweep;
};

inline void write_result_table(const std::string& path, const std::vector<ResultRow>& rows,
                               const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path, false);
    for (const auto& c : comments) out << "# " << c << "\n";
    const bool sweeping = !rows.empty() && rows.front().sweep.has_value();
    out << "method,variant,shots,accuracy_mean,accuracy_ci,sk_mean,ho_mean,episodes,seed";
    if (sweeping) out << ",param,value";
    out << "\n";
    for (const auto& r : rows) {
        out << r.method << "," << r.variant << "," << r.shots << ","
            << format_double(r.accuracy_mean) << "," << format_double(r.accuracy_ci) << ","
            << format_double(r.sk_mean) << "," << format_double(r.ho_mean) << "," << r.episodes
            << "," << r.seed;
        if (sweeping) out << "," << r.sweep->first << "," << format_double(r.sweep->second);
        out << "\n";
    }
    if (!out) throw IoError("write failed on '" + path + "'");
}

struct TraceRow {
    int iteration = 0;
    double lsp = 0.0;
    double unif = 0.0;
    double total = 0.0;
};

inline void write_loss_trace(const std::string& path, const std::vector<TraceRow>& rows,
                             const std::vector<std::string>& comments = {}) {
    auto out = detail::open_output(path, false);
    for (const auto& c : comments) out << "# " << c << "\n";
    out << "iteration,loss_lsp,loss_unif,loss_total\n";
    for (const auto& r : rows) {
        out << r.iteration << "," << format_double(r.lsp) << "," << format_double(r.unif) << ","
            << format_double(r.total) << "\n";
    }
    if (!out) throw IoError("write failed on '" + path + "'");
}

}  // namespace nohub
