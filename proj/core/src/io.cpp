#include "lassopsi/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lassopsi/errors.hpp"

namespace lassopsi {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_number(std::string text, const std::string& where) {
    const auto first = text.find_first_not_of(" \t\r");
    const auto last = text.find_last_not_of(" \t\r");
    text = first == std::string::npos ? std::string() : text.substr(first, last - first + 1);
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"')
        text = text.substr(1, text.size() - 2);
    require(!text.empty(), ErrorCode::Parse, where + ": empty field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    require(end == text.c_str() + text.size() && errno != ERANGE, ErrorCode::Parse,
            where + ": '" + text + "' is not a number");
    return v;
}

} // namespace

MatrixXd read_csv_matrix(const std::string& path, bool header) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::Parse, "cannot open '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (header && line_no == 1) continue;
        const auto fields = split_fields(line);
        const std::string where = path + ":" + std::to_string(line_no);
        if (rows.empty()) width = fields.size();
        require(fields.size() == width, ErrorCode::Parse,
                where + ": expected " + std::to_string(width) + " fields, found " +
                    std::to_string(fields.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c)
            row.push_back(parse_number(fields[c], where + ":" + std::to_string(c + 1)));
        rows.push_back(std::move(row));
    }
    require(!rows.empty(), ErrorCode::Parse, "'" + path + "' contains no data");
    MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < width; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

VectorXd read_csv_vector(const std::string& path, bool header) {
    const MatrixXd m = read_csv_matrix(path, header);
    require(m.cols() == 1 || m.rows() == 1, ErrorCode::Parse,
            "'" + path + "' must hold a single row or column");
    if (m.cols() == 1) return m.col(0);
    return m.row(0).transpose();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv_matrix(const std::string& path, const MatrixXd& m) {
    std::ostringstream out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

nlohmann::json to_json(const VectorXd& v) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

nlohmann::json to_json(const MatrixXd& m) {
    nlohmann::json j = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) j.push_back(to_json(VectorXd(m.row(r).transpose())));
    return j;
}

nlohmann::json to_json(const IndexSet& s) { return nlohmann::json(s); }

VectorXd vector_from_json(const nlohmann::json& j) {
    VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

IndexSet index_set_from_json(const nlohmann::json& j) { return j.get<IndexSet>(); }

void write_file_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorCode::InvalidArgument, "cannot write '" + tmp + "'");
        out << text;
        out.flush();
        require(out.good(), ErrorCode::InvalidArgument, "failed writing '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::Parse, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace lassopsi
