// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "resact/trainer.hpp"

namespace resact {

inline constexpr const char* kMetricsHeader = "iteration,L_Rec,L_TD1,L_TD2,L_Exp,L_Con,meanQ,val_NCIS";

namespace detail {

inline std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// One row every `interval` iterations, plus any row carrying a validation
/// value and the final row. Doubles are written with 17 significant digits
/// so the file round-trips exactly.
inline void write_metrics_csv(std::ostream& os, const std::vector<IterationMetrics>& history,
                              std::size_t interval = 1) {
  if (interval == 0) throw std::invalid_argument("write_metrics_csv: interval must be >= 1");
  os << kMetricsHeader << '\n';
  for (std::size_t i = 0; i < history.size(); ++i) {
    const IterationMetrics& m = history[i];
    if (m.iteration % interval != 0 && !m.val_ncis && i + 1 != history.size()) continue;
    os << m.iteration << ',' << detail::exact(m.l_rec) << ',' << detail::exact(m.l_td1) << ','
       << detail::exact(m.l_td2) << ',' << detail::exact(m.l_exp) << ',' << detail::exact(m.l_con) << ','
       << detail::exact(m.mean_q) << ',';
    if (m.val_ncis) os << detail::exact(*m.val_ncis);
    os << '\n';
  }
}

inline std::vector<IterationMetrics> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader) {
    throw std::runtime_error("metrics CSV: missing or unexpected header");
  }
  std::vector<IterationMetrics> out;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": expected 8 cells");
    try {
      IterationMetrics m;
      m.iteration = std::stoull(cells[0]);
      m.l_rec = std::stod(cells[1]);
      m.l_td1 = std::stod(cells[2]);
      m.l_td2 = std::stod(cells[3]);
      m.l_exp = std::stod(cells[4]);
      m.l_con = std::stod(cells[5]);
      m.mean_q = std::stod(cells[6]);
      if (!cells[7].empty()) m.val_ncis = std::stod(cells[7]);
      out.push_back(m);
    } catch (const std::logic_error&) {
      throw std::runtime_error("metrics CSV line " + std::to_string(line_no) + ": bad number");
    }
  }
  return out;
}

}  // namespace resact
