#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tempattn/common.hpp"

namespace tempattn {

/// Fixed-format numeric printing so identical values always serialize to
/// identical bytes (the determinism contract compares CSVs bytewise).
inline std::string fnum(double v, int precision = 9) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    return buf;
}

inline std::string fnum_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

/// CSV writer used by every artifact-emitting command. All files begin with
/// '#' comment lines (tool version, config hash, master seed) followed by a
/// header row.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open for writing: " + path);
        path_ = path;
    }

    void comment(const std::string& text) { out_ << "# " << text << "\n"; }

    void standard_comments(const std::string& config_hash, uint64_t master_seed) {
        out_ << "# tempattn " << kVersion << "\n";
        out_ << "# config_hash=" << config_hash << "\n";
        out_ << "# master_seed=" << master_seed << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << "\n";
        if (!out_) throw Error("write failed: " + path_);
    }

private:
    std::ofstream out_;
    std::string path_;
};

/// Minimal CSV reader: skips '#' comments, splits on commas (fields in this
/// project never contain commas or quotes).
class CsvReader {
public:
    explicit CsvReader(const std::string& path) : in_(path) {
        if (!in_) throw Error("cannot open for reading: " + path);
    }

    /// Returns false at EOF; comment lines are skipped transparently.
    bool next(std::vector<std::string>& cells) {
        std::string line;
        while (std::getline(in_, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            cells.clear();
            size_t start = 0;
            while (true) {
                size_t pos = line.find(',', start);
                if (pos == std::string::npos) {
                    cells.push_back(line.substr(start));
                    break;
                }
                cells.push_back(line.substr(start, pos - start));
                start = pos + 1;
            }
            return true;
        }
        return false;
    }

private:
    std::ifstream in_;
};

}  // namespace tempattn
