#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvsim {

// Round-trip formatting: 17 significant digits reproduce the double exactly.
inline std::string csv_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : os_(path, std::ios::binary) {
        if (!os_) throw std::runtime_error("cannot open '" + path + "' for writing");
        path_ = path;
    }

    // Metadata lines ("# key: value") precede the column header.
    void comment(const std::string& line) { os_ << "# " << line << "\n"; }

    void header(const std::vector<std::string>& cols) { write_cells(cols); }

    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i)
            os_ << (i ? "," : "") << csv_num(vals[i]);
        os_ << "\n";
    }

    // Absent cells stay empty (theory columns outside their stepsize range).
    void row(const std::vector<std::optional<double>>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i) os_ << ",";
            if (vals[i]) os_ << csv_num(*vals[i]);
        }
        os_ << "\n";
    }

    void row_cells(const std::vector<std::string>& cells) { write_cells(cells); }

    void close() {
        os_.close();
        if (!os_) throw std::runtime_error("write to '" + path_ + "' failed");
    }

  private:
    // RFC 4180 quoting, applied only when a cell needs it.
    static std::string quoted(const std::string& cell) {
        if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
        std::string out = "\"";
        for (char c : cell) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
        return out;
    }

    void write_cells(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            os_ << (i ? "," : "") << quoted(cells[i]);
        os_ << "\n";
    }

    std::ofstream os_;
    std::string path_;
};

}  // namespace mvsim
