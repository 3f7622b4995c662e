#pragma once

// Comma-separated tables with shortest round-trip number formatting and LF
// line endings.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "gsto/errors.hpp"
#include "gsto/simulator.hpp"

namespace gsto::io {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  if (r.ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error("parse_double: bad number '" + s + "'");
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return k;
    throw Error("csv: no column named " + name);
  }
};

inline void write_csv(std::ostream& out, const CsvTable& t) {
  for (std::size_t k = 0; k < t.header.size(); ++k) out << (k ? "," : "") << t.header[k];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_double(row[k]);
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_csv(out, t);
  if (!out) throw Error("write failed: " + path);
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(l);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!l.empty() && l.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw Error("csv: empty input");
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) throw Error("csv: wrong cell count on line " + std::to_string(lineno));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  return read_csv(in);
}

/// t, y1..yN, ymeas1..ymeasN, x_11, xhat_11, e_11, x_12, ..., V_1..V_N
inline CsvTable trajectory_table(const Trajectory& tr, const Mat& V_sub) {
  const auto n = static_cast<Eigen::Index>(tr.subsystems());
  CsvTable t;
  t.header.push_back("t");
  for (Eigen::Index i = 1; i <= n; ++i) t.header.push_back("y" + std::to_string(i));
  for (Eigen::Index i = 1; i <= n; ++i) t.header.push_back("ymeas" + std::to_string(i));
  for (Eigen::Index i = 1; i <= n; ++i) {
    for (int j = 1; j <= 2; ++j) {
      const std::string s = std::to_string(i) + std::to_string(j);
      t.header.push_back("x_" + s);
      t.header.push_back("xhat_" + s);
      t.header.push_back("e_" + s);
    }
  }
  for (Eigen::Index i = 1; i <= n; ++i) t.header.push_back("V_" + std::to_string(i));

  t.rows.reserve(tr.samples());
  for (std::size_t k = 0; k < tr.samples(); ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    std::vector<double> row;
    row.reserve(t.header.size());
    row.push_back(tr.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(tr.y_clean(r, i));
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(tr.y_meas(r, i));
    for (Eigen::Index c = 0; c < 2 * n; ++c) {
      row.push_back(tr.x(r, c));
      row.push_back(tr.xhat(r, c));
      row.push_back(tr.xhat(r, c) - tr.x(r, c));
    }
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(V_sub(r, i));
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Rebuilds the state/output part of a trajectory from its table.
inline Trajectory trajectory_from_table(const CsvTable& t) {
  std::size_t n = 0;
  while (true) {
    bool found = false;
    for (const auto& h : t.header) found = found || h == "y" + std::to_string(n + 1);
    if (!found) break;
    ++n;
  }
  if (n == 0) throw Error("csv: not a trajectory table");
  const auto S = static_cast<Eigen::Index>(t.rows.size());
  const auto N = static_cast<Eigen::Index>(n);
  Trajectory tr;
  tr.x.resize(S, 2 * N);
  tr.xhat.resize(S, 2 * N);
  tr.y_clean.resize(S, N);
  tr.y_meas.resize(S, N);
  tr.u.resize(S, 0);
  tr.w.resize(S, 0);
  const std::size_t ct = t.column("t");
  std::vector<std::size_t> cy, cm, cx, cxh;
  for (std::size_t i = 1; i <= n; ++i) {
    cy.push_back(t.column("y" + std::to_string(i)));
    cm.push_back(t.column("ymeas" + std::to_string(i)));
    for (int j = 1; j <= 2; ++j) {
      cx.push_back(t.column("x_" + std::to_string(i) + std::to_string(j)));
      cxh.push_back(t.column("xhat_" + std::to_string(i) + std::to_string(j)));
    }
  }
  for (Eigen::Index r = 0; r < S; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    tr.times.push_back(row[ct]);
    for (Eigen::Index i = 0; i < N; ++i) {
      tr.y_clean(r, i) = row[cy[static_cast<std::size_t>(i)]];
      tr.y_meas(r, i) = row[cm[static_cast<std::size_t>(i)]];
    }
    for (Eigen::Index c = 0; c < 2 * N; ++c) {
      tr.x(r, c) = row[cx[static_cast<std::size_t>(c)]];
      tr.xhat(r, c) = row[cxh[static_cast<std::size_t>(c)]];
    }
  }
  return tr;
}

}  // namespace gsto::io
