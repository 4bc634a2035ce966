#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "treexp/model.hpp"

namespace treexp {

// ---------------------------------------------------------------------------
// Number formatting: 17 significant digits, locale-independent, so decimal
// round trips are bit-exact.
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    if (ec != std::errc{}) throw ValidationError("number formatting failed");
    return std::string(buf, ptr);
}

inline double parse_double(const std::string& tok, std::size_t line_no) {
    double v = 0.0;
    const char* begin = tok.data();
    const char* end = begin + tok.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    return v;
}

// ---------------------------------------------------------------------------
// Model files
//
//   treexp-model 1
//   vars <d>
//   alphabet <k>
//   kind dense|tree
//   ... payload ...
//
// Dense payload: "table <cells>" then the probabilities in row-major order,
// whitespace separated.  Tree payload: "edges <d-1>" and one "i j" line per
// edge, then "node <i>" / "edge <i> <j>" blocks with their tables.
// ---------------------------------------------------------------------------

using ModelVariant = std::variant<DenseJoint, TreeModel>;

namespace detail {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next non-empty, non-comment line; returns false at EOF.
    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            const auto pos = line.find_first_not_of(" \t\r");
            if (pos == std::string::npos) continue;
            if (line[pos] == '#') continue;
            return true;
        }
        return false;
    }

    std::size_t line_no() const { return line_no_; }

private:
    std::istream& in_;
    std::size_t line_no_ = 0;
};

inline std::vector<std::string> tokens(const std::string& line) {
    std::istringstream iss(line);
    std::vector<std::string> out;
    for (std::string t; iss >> t;) out.push_back(std::move(t));
    return out;
}

/// Read exactly `count` numbers, consuming as many lines as needed.
inline std::vector<double> read_numbers(LineReader& r, std::size_t count) {
    std::vector<double> out;
    out.reserve(count);
    std::string line;
    while (out.size() < count) {
        if (!r.next(line)) throw ParseError("unexpected end of file while reading numbers");
        for (const auto& t : tokens(line)) out.push_back(parse_double(t, r.line_no()));
    }
    if (out.size() != count)
        throw ParseError("line " + std::to_string(r.line_no()) + ": too many numbers");
    return out;
}

inline long parse_int(const std::string& tok, std::size_t line_no) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + tok + "'");
    return v;
}

}  // namespace detail

inline void write_model(std::ostream& out, const DenseJoint& dense) {
    out << "treexp-model 1\n";
    out << "vars " << dense.num_vars() << "\n";
    out << "alphabet " << dense.alphabet().size() << "\n";
    out << "kind dense\n";
    out << "table " << dense.table_size() << "\n";
    for (std::size_t i = 0; i < dense.table_size(); ++i)
        out << format_double(dense.probs()[i]) << "\n";
}

inline void write_model(std::ostream& out, const TreeModel& model) {
    const int d = model.num_vars();
    out << "treexp-model 1\n";
    out << "vars " << d << "\n";
    out << "alphabet " << model.alphabet().size() << "\n";
    out << "kind tree\n";
    out << "edges " << model.structure().size() << "\n";
    for (const auto& [a, b] : model.structure().edges()) out << a << " " << b << "\n";
    for (int i = 0; i < d; ++i) {
        out << "node " << i << "\n";
        std::string sep;
        for (double v : model.node_marginal(i)) {
            out << sep << format_double(v);
            sep = " ";
        }
        out << "\n";
    }
    for (const auto& [e, tab] : model.edge_marginals()) {
        out << "edge " << e.first << " " << e.second << "\n";
        std::string sep;
        for (double v : tab) {
            out << sep << format_double(v);
            sep = " ";
        }
        out << "\n";
    }
}

inline void write_model_file(const std::string& path, const ModelVariant& model) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open '" + path + "' for writing");
    std::visit([&out](const auto& m) { write_model(out, m); }, model);
    if (!out) throw ParseError("write to '" + path + "' failed");
}

inline ModelVariant read_model(std::istream& in) {
    detail::LineReader r(in);
    std::string line;
    auto expect = [&](const char* what) {
        if (!r.next(line)) throw ParseError(std::string("missing ") + what);
        return detail::tokens(line);
    };

    auto head = expect("header");
    if (head.size() != 2 || head[0] != "treexp-model" || head[1] != "1")
        throw ParseError("line " + std::to_string(r.line_no()) + ": not a treexp-model version 1 file");
    auto vars = expect("vars");
    if (vars.size() != 2 || vars[0] != "vars")
        throw ParseError("line " + std::to_string(r.line_no()) + ": expected 'vars <d>'");
    const int d = static_cast<int>(detail::parse_int(vars[1], r.line_no()));
    auto alpha = expect("alphabet");
    if (alpha.size() != 2 || alpha[0] != "alphabet")
        throw ParseError("line " + std::to_string(r.line_no()) + ": expected 'alphabet <k>'");
    const int k = static_cast<int>(detail::parse_int(alpha[1], r.line_no()));
    auto kind = expect("kind");
    if (kind.size() != 2 || kind[0] != "kind")
        throw ParseError("line " + std::to_string(r.line_no()) + ": expected 'kind dense|tree'");

    if (d < 1 || k < 2) throw ValidationError("model header out of range");

    if (kind[1] == "dense") {
        auto tab = expect("table");
        if (tab.size() != 2 || tab[0] != "table")
            throw ParseError("line " + std::to_string(r.line_no()) + ": expected 'table <cells>'");
        const auto cells = static_cast<std::size_t>(detail::parse_int(tab[1], r.line_no()));
        if (cells > kDenseBudget) throw TooLarge("dense table exceeds the cell budget");
        auto probs = detail::read_numbers(r, cells);
        return DenseJoint(d, Alphabet(k), std::move(probs));
    }
    if (kind[1] != "tree")
        throw ParseError("line " + std::to_string(r.line_no()) + ": unknown kind '" + kind[1] + "'");

    auto eh = expect("edges");
    if (eh.size() != 2 || eh[0] != "edges")
        throw ParseError("line " + std::to_string(r.line_no()) + ": expected 'edges <count>'");
    const long ecount = detail::parse_int(eh[1], r.line_no());
    std::vector<NodePair> edges;
    for (long i = 0; i < ecount; ++i) {
        auto et = expect("edge endpoints");
        if (et.size() != 2)
            throw ParseError("line " + std::to_string(r.line_no()) + ": expected 'i j'");
        edges.emplace_back(static_cast<int>(detail::parse_int(et[0], r.line_no())),
                           static_cast<int>(detail::parse_int(et[1], r.line_no())));
    }

    std::vector<std::vector<double>> node_marg(static_cast<std::size_t>(d));
    std::map<NodePair, std::vector<double>> edge_marg;
    std::size_t nodes_seen = 0, edges_seen = 0;
    while (nodes_seen < static_cast<std::size_t>(d) || edges_seen < static_cast<std::size_t>(ecount)) {
        auto t = expect("node or edge block");
        if (t[0] == "node" && t.size() == 2) {
            const int i = static_cast<int>(detail::parse_int(t[1], r.line_no()));
            if (i < 0 || i >= d) throw ParseError("line " + std::to_string(r.line_no()) + ": node out of range");
            node_marg[static_cast<std::size_t>(i)] = detail::read_numbers(r, static_cast<std::size_t>(k));
            ++nodes_seen;
        } else if (t[0] == "edge" && t.size() == 3) {
            const int a = static_cast<int>(detail::parse_int(t[1], r.line_no()));
            const int b = static_cast<int>(detail::parse_int(t[2], r.line_no()));
            edge_marg[make_pair_sorted(a, b)] =
                detail::read_numbers(r, static_cast<std::size_t>(k) * static_cast<std::size_t>(k));
            ++edges_seen;
        } else {
            throw ParseError("line " + std::to_string(r.line_no()) + ": expected 'node <i>' or 'edge <i> <j>'");
        }
    }
    return TreeModel::from_learned(EdgeSet(d, std::move(edges)), Alphabet(k), std::move(node_marg),
                                   std::move(edge_marg));
}

inline ModelVariant read_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_model(in);
}

/// Dense view of a model file payload, for operations needing the joint.
inline DenseJoint model_as_dense(const ModelVariant& m, std::size_t budget = kDenseBudget) {
    if (std::holds_alternative<DenseJoint>(m)) return std::get<DenseJoint>(m);
    return std::get<TreeModel>(m).to_dense(budget);
}

// ---------------------------------------------------------------------------
// Sample files: one row per line, space- or comma-separated integer symbols.
// ---------------------------------------------------------------------------

inline SampleMatrix read_samples(std::istream& in, std::optional<int> alphabet_size = {}) {
    std::vector<std::vector<int>> rows;
    std::string line;
    std::size_t line_no = 0;
    int max_symbol = -1;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        for (char& c : line)
            if (c == ',') c = ' ';
        const auto toks = detail::tokens(line);
        if (toks.empty()) continue;
        std::vector<int> row;
        row.reserve(toks.size());
        for (const auto& t : toks) {
            const long v = detail::parse_int(t, line_no);
            if (v < 0) throw ParseError("line " + std::to_string(line_no) + ": negative symbol");
            row.push_back(static_cast<int>(v));
            max_symbol = std::max(max_symbol, static_cast<int>(v));
        }
        if (width == 0)
            width = row.size();
        else if (row.size() != width)
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(width) + " symbols, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("sample file has no rows");
    const int k = alphabet_size.value_or(std::max(max_symbol + 1, 2));
    SampleMatrix out(static_cast<int>(width), Alphabet(k));
    for (const auto& row : rows) out.push_row(row);
    return out;
}

inline SampleMatrix read_sample_file(const std::string& path, std::optional<int> alphabet_size = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return read_samples(in, alphabet_size);
}

inline void write_samples(std::ostream& out, const SampleMatrix& samples) {
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        std::string sep;
        for (int v = 0; v < samples.num_vars(); ++v) {
            out << sep << samples.at(r, v);
            sep = " ";
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// CSV: header row, '.' decimal point, no locale dependence.
// ---------------------------------------------------------------------------

class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::vector<std::string> header) : out_(out) {
        std::string sep;
        for (const auto& h : header) {
            out_ << sep << h;
            sep = ",";
        }
        out_ << "\n";
        columns_ = header.size();
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) throw ValidationError("CSV row width mismatch");
        std::string sep;
        for (const auto& c : cells) {
            out_ << sep << c;
            sep = ",";
        }
        out_ << "\n";
    }

private:
    std::ostream& out_;
    std::size_t columns_;
};

/// Serialize a rate for reports: finite values at 17 digits, +inf as "inf".
inline std::string format_rate(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return format_double(v);
}

}  // namespace treexp
