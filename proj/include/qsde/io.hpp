#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qsde/errors.hpp"
#include "qsde/linalg.hpp"
#include "qsde/montecarlo.hpp"
#include "qsde/oscillator.hpp"
#include "qsde/sse.hpp"
#include "qsde/version.hpp"

namespace qsde {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Line-oriented "key = value" configuration with [section] headers.
// Repeated keys are kept in order (used for the lindblad operator list).
class ConfigFile {
public:
    struct Entry {
        std::string section, key, value;
        int line = 0;
    };

    static ConfigFile parse_string(const std::string& text, const std::string& name) {
        ConfigFile cfg;
        cfg.name_ = name;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::size_t hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(name + ":" + std::to_string(lineno) +
                                      ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(name + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
            Entry e;
            e.section = section;
            e.key = trim(line.substr(0, eq));
            e.value = trim(line.substr(eq + 1));
            e.line = lineno;
            if (e.key.empty())
                throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
            cfg.entries_.push_back(std::move(e));
        }
        return cfg;
    }

    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse_string(buf.str(), path);
    }

    const std::string& name() const { return name_; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::optional<std::string> get(const std::string& section, const std::string& key) const {
        std::optional<std::string> out;
        for (const Entry& e : entries_)
            if (e.section == section && e.key == key) out = e.value; // last one wins
        return out;
    }

    std::vector<std::string> get_all(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        for (const Entry& e : entries_)
            if (e.section == section && e.key == key) out.push_back(e.value);
        return out;
    }

    std::string get_required(const std::string& section, const std::string& key) const {
        auto v = get(section, key);
        if (!v)
            throw ConfigError(name_ + ": missing key '" + section + "." + key + "'");
        return *v;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        auto v = get(section, key);
        return v ? parse_double(section, key, *v) : fallback;
    }

    long long get_int(const std::string& section, const std::string& key,
                      long long fallback) const {
        auto v = get(section, key);
        if (!v) return fallback;
        try {
            std::size_t pos = 0;
            const long long out = std::stoll(*v, &pos);
            if (pos != v->size()) throw std::invalid_argument("");
            return out;
        } catch (const std::exception&) {
            throw ConfigError(name_ + ": key '" + section + "." + key + "': not an integer: '" +
                              *v + "'");
        }
    }

private:
    double parse_double(const std::string& section, const std::string& key,
                        const std::string& v) const {
        try {
            std::size_t pos = 0;
            const double out = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument("");
            return out;
        } catch (const std::exception&) {
            throw ConfigError(name_ + ": key '" + section + "." + key + "': not a number: '" + v +
                              "'");
        }
    }

    std::string name_;
    std::vector<Entry> entries_;
};

// Dense complex matrix text format: "rows cols" header, then one line per row
// with "re,im" entries.
inline void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << " " << m.cols() << "\n";
    char buf[64];
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g", m(r, c).real(), m(r, c).imag());
            out << (c ? " " : "") << buf;
        }
        out << "\n";
    }
}

inline void write_matrix(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    write_matrix(out, m);
}

inline Matrix read_matrix(std::istream& in, const std::string& name) {
    int rows = 0, cols = 0;
    if (!(in >> rows >> cols) || rows < 1 || cols < 1)
        throw ConfigError(name + ": bad matrix header (expected 'rows cols')");
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            std::string tok;
            if (!(in >> tok))
                throw ConfigError(name + ": truncated matrix data at row " + std::to_string(r));
            double re = 0, im = 0;
            if (std::sscanf(tok.c_str(), "%lf,%lf", &re, &im) != 2)
                throw ConfigError(name + ": bad entry '" + tok + "' (expected 're,im')");
            m(r, c) = cx(re, im);
        }
    return m;
}

inline Matrix read_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
    return read_matrix(in, path);
}

inline Vec read_vector(const std::string& path) {
    const Matrix m = read_matrix(path);
    if (m.cols() != 1) throw ConfigError(path + ": expected a single-column vector file");
    Vec v(std::size_t(m.rows()));
    for (int r = 0; r < m.rows(); ++r) v[std::size_t(r)] = m(r, 0);
    return v;
}

// Builds the SSE problem from the [problem] section: either a builtin model
// or explicit operator files.
inline SSEProblem problem_from_config(const ConfigFile& cfg) {
    if (auto model = cfg.get("problem", "model")) {
        if (*model == "oscillator") {
            FockTruncation tr{int(cfg.get_int("problem", "levels", 50))};
            return oscillator_problem(tr);
        }
        throw ConfigError(cfg.name() + ": unknown model '" + *model + "' (valid: oscillator)");
    }
    const Matrix h = read_matrix(cfg.get_required("problem", "hamiltonian"));
    std::vector<Matrix> ls;
    for (const std::string& path : cfg.get_all("problem", "lindblad"))
        ls.push_back(read_matrix(path));
    const Matrix a = read_matrix(cfg.get_required("problem", "observable"));
    const Vec z0 = read_vector(cfg.get_required("problem", "initial"));
    return make_sse_problem(h, std::move(ls), a, z0);
}

inline SchemeConfig scheme_config_from(const ConfigFile& cfg) {
    SchemeConfig sc;
    if (auto s = cfg.get("run", "scheme")) sc.scheme = parse_scheme(*s);
    sc.T = cfg.get_double("run", "T", sc.T);
    sc.steps = int(cfg.get_int("run", "steps", sc.steps));
    sc.trajectories = cfg.get_int("run", "trajectories", sc.trajectories);
    if (auto nz = cfg.get("run", "noise")) sc.noise = parse_noise_law(*nz);
    sc.seed = std::uint64_t(cfg.get_int("run", "seed", 0));
    sc.output_points = int(cfg.get_int("run", "output_points", sc.output_points));
    sc.batches = int(cfg.get_int("run", "batches", sc.batches));
    sc.workers = int(cfg.get_int("run", "workers", sc.workers));
    return sc;
}

// Header block emitted at the top of every data file; key = value comment
// lines, deterministic for a fixed (seed, config).
struct RunManifest {
    std::vector<std::pair<std::string, std::string>> fields;

    void add(std::string key, std::string value) {
        fields.emplace_back(std::move(key), std::move(value));
    }
    void add(std::string key, double value) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", value);
        fields.emplace_back(std::move(key), buf);
    }
    void add(std::string key, long long value) {
        fields.emplace_back(std::move(key), std::to_string(value));
    }
};

inline RunManifest make_manifest(const std::string& command) {
    RunManifest m;
    m.add("tool", std::string("qsde ") + kVersion);
    m.add("command", command);
    return m;
}

inline void describe(RunManifest& m, const SchemeConfig& sc) {
    m.add("scheme", scheme_name(sc.scheme));
    m.add("T", sc.T);
    m.add("steps", (long long)sc.steps);
    m.add("trajectories", (long long)sc.trajectories);
    m.add("noise", noise_name(sc.noise));
    m.add("seed", (long long)sc.seed);
    m.add("output_points", (long long)sc.output_points);
    m.add("batches", (long long)sc.batches);
}

struct CsvTable {
    std::map<std::string, std::string> manifest;
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    std::string manifest_value(const std::string& key) const {
        auto it = manifest.find(key);
        if (it == manifest.end())
            throw ConfigError("data file is missing manifest key '" + key + "'");
        return it->second;
    }
};

inline void write_csv(const std::string& path, const RunManifest& manifest,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& columns) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    for (const auto& [k, v] : manifest.fields) out << "# " << k << " = " << v << "\n";
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << "\n";
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& col : columns)
        if (col.size() != rows) throw DimensionError("write_csv: ragged columns");
    char buf[40];
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", columns[c][r]);
            out << (c ? "," : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw ConfigError("error while writing '" + path + "'");
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file '" + path + "'");
    CsvTable t;
    std::string line;
    bool have_header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::size_t eq = line.find('=');
            if (eq != std::string::npos)
                t.manifest[trim(line.substr(1, eq - 1))] = trim(line.substr(eq + 1));
            continue;
        }
        if (!have_header) {
            t.header = split_csv_line(line);
            t.columns.assign(t.header.size(), {});
            have_header = true;
            continue;
        }
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != t.header.size())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": wrong number of columns");
        for (std::size_t c = 0; c < cells.size(); ++c) {
            try {
                t.columns[c].push_back(std::stod(cells[c]));
            } catch (const std::exception&) {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" +
                                  cells[c] + "'");
            }
        }
    }
    if (!have_header) throw ConfigError(path + ": empty data file");
    return t;
}

} // namespace qsde
