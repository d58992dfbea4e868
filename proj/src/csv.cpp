#include "drmvp/csv.hpp"
#include "drmvp/ticks.hpp"
#include "drmvp/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace drmvp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

int CsvTable::col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

int CsvTable::col_required(const std::string& name) const {
    int c = col(name);
    if (c < 0) throw std::runtime_error("csv: missing column '" + name + "'");
    return c;
}

double CsvTable::num(size_t row, int c) const {
    const std::string& s = rows.at(row).at(static_cast<size_t>(c));
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw std::runtime_error("csv: not a number: '" + s + "'");
    return v;
}

long long CsvTable::integer(size_t row, int c) const {
    const std::string& s = rows.at(row).at(static_cast<size_t>(c));
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str()) throw std::runtime_error("csv: not an integer: '" + s + "'");
    return v;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string c = line.substr(1);
            if (!c.empty() && c[0] == ' ') c = c.substr(1);
            t.comments.push_back(c);
            continue;
        }
        if (!have_header) {
            t.header = split_line(line);
            have_header = true;
        } else {
            auto cells = split_line(line);
            if (cells.size() != t.header.size())
                throw std::runtime_error("csv: ragged row in " + path);
            t.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw std::runtime_error("csv: no header in " + path);
    return t;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header,
                     const std::vector<std::string>& comments)
    : path_(path), ncols_(header.size()) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    for (const auto& c : comments) {
        buf_ += "# ";
        buf_ += c;
        buf_ += "\n";
    }
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) buf_ += ",";
        buf_ += header[i];
    }
    buf_ += "\n";
}

void CsvWriter::cell(const std::string& v) {
    if (col_) buf_ += ",";
    buf_ += v;
    ++col_;
}

void CsvWriter::cell(double v) { cell(format_g17(v)); }

void CsvWriter::cell(long long v) { cell(std::to_string(v)); }

void CsvWriter::end_row() {
    if (col_ != ncols_) throw std::runtime_error("csv: row width mismatch writing " + path_);
    buf_ += "\n";
    col_ = 0;
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    if (col_ != 0) throw std::runtime_error("csv: unterminated row writing " + path_);
    std::ofstream out(path_, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path_);
    out << buf_;
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
        // destructor must not throw; close() explicitly to see errors
    }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& comments) {
    CsvWriter w(path, {"i", "j", "value"}, comments);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            w.cell(static_cast<long long>(i));
            w.cell(static_cast<long long>(j));
            w.cell(m(i, j));
            w.end_row();
        }
    w.close();
}

void write_ticks_csv(const std::string& path, const TickPanel& panel,
                     const std::vector<std::string>& comments) {
    CsvWriter w(path, {"asset", "day", "frac", "log_price"}, comments);
    for (int d = 0; d < panel.days; ++d)
        for (int a = 0; a < panel.p; ++a) {
            const TickSeries& s = panel.data[static_cast<size_t>(d)][static_cast<size_t>(a)];
            for (size_t k = 0; k < s.frac.size(); ++k) {
                w.cell(static_cast<long long>(a));
                w.cell(static_cast<long long>(d + 1));
                w.cell(s.frac[k]);
                w.cell(s.price[k]);
                w.end_row();
            }
        }
    w.close();
}

TickPanel read_ticks_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int ca = t.col_required("asset"), cd = t.col_required("day");
    int cf = t.col_required("frac"), cp = t.col_required("log_price");
    int p = 0, days = 0;
    for (size_t r = 0; r < t.rows.size(); ++r) {
        p = std::max(p, static_cast<int>(t.integer(r, ca)) + 1);
        days = std::max(days, static_cast<int>(t.integer(r, cd)));
    }
    TickPanel panel;
    panel.init(p, days);
    double prev_frac = -1.0;
    int prev_asset = -1, prev_day = -1;
    for (size_t r = 0; r < t.rows.size(); ++r) {
        int a = static_cast<int>(t.integer(r, ca));
        int d = static_cast<int>(t.integer(r, cd)) - 1;
        double frac = t.num(r, cf);
        if (frac < 0.0 || frac > 1.0)
            throw std::runtime_error("ticks: frac outside [0,1] in " + path);
        if (a == prev_asset && d == prev_day) {
            if (frac <= prev_frac)
                throw std::runtime_error("ticks: timestamps not strictly increasing within asset-day in " + path);
        }
        prev_asset = a;
        prev_day = d;
        prev_frac = frac;
        TickSeries& s = panel.data[static_cast<size_t>(d)][static_cast<size_t>(a)];
        s.frac.push_back(frac);
        s.price.push_back(t.num(r, cp));
    }
    return panel;
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    CsvTable t = read_csv(path);
    int ci = t.col_required("i"), cj = t.col_required("j"), cv = t.col_required("value");
    Eigen::Index n = 0, mcols = 0;
    for (size_t r = 0; r < t.rows.size(); ++r) {
        n = std::max(n, static_cast<Eigen::Index>(t.integer(r, ci)) + 1);
        mcols = std::max(mcols, static_cast<Eigen::Index>(t.integer(r, cj)) + 1);
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, mcols);
    for (size_t r = 0; r < t.rows.size(); ++r)
        m(t.integer(r, ci), t.integer(r, cj)) = t.num(r, cv);
    return m;
}

} // namespace drmvp
