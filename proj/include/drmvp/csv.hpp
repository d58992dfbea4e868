#pragma once
// CSV I/O used by every pipeline stage.
// Conventions: comma separated, one header row, floats written with %.17g so
// reruns are byte-identical; lines starting with '#' are comments (the writer
// records the run seed there, readers skip them).

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace drmvp {

struct CsvTable {
    std::vector<std::string> comments;   // leading '#' lines, markers stripped
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const;             // -1 if absent
    int col_required(const std::string& name) const;    // throws if absent
    double num(size_t row, int col) const;
    long long integer(size_t row, int col) const;
};

CsvTable read_csv(const std::string& path);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::string>& comments = {});
    void cell(const std::string& v);
    void cell(double v);
    void cell(long long v);
    void cell(int v) { cell(static_cast<long long>(v)); }
    void end_row();
    void close();   // writes the whole buffer at once; also run by destructor
    ~CsvWriter();

private:
    std::string path_;
    std::string buf_;
    size_t ncols_;
    size_t col_ = 0;
    bool closed_ = false;
};

// dense matrix as row-major (i, j, value) triplets
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& comments = {});
Eigen::MatrixXd read_matrix_csv(const std::string& path);

} // namespace drmvp
