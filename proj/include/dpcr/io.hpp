#pragma once

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dpcr/core.hpp"
#include "dpcr/static_mech.hpp"

namespace dpcr {

// Doubles are printed with %.17g so a parse -> emit round trip is
// byte-identical and lossless.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- stream files: one `t,op,item` line per event -------------------------
//
// op is one of ins/del/noop; timestamps must increase by exactly 1 starting
// at 1 (callers generate noop lines for quiet steps).  Item is omitted for
// noop.  Violations raise InvalidStreamError.

inline void write_stream(std::ostream& os,
                         const std::vector<UpdateEvent>& stream) {
  for (const auto& e : stream) {
    os << e.t << ',';
    switch (e.op) {
      case Op::insert:
        os << "ins," << e.item;
        break;
      case Op::remove:
        os << "del," << e.item;
        break;
      case Op::noop:
        os << "noop,";
        break;
    }
    os << '\n';
  }
}

inline std::vector<UpdateEvent> read_stream(std::istream& is) {
  std::vector<UpdateEvent> out;
  std::string line;
  Timestamp expect = 1;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string t_s, op_s, item_s;
    if (!std::getline(ss, t_s, ',') || !std::getline(ss, op_s, ','))
      throw InvalidStreamError("malformed stream line " +
                               std::to_string(lineno));
    std::getline(ss, item_s, ',');
    Timestamp t = 0;
    try {
      t = std::stoull(t_s);
    } catch (const std::exception&) {
      throw InvalidStreamError("bad timestamp on line " +
                               std::to_string(lineno));
    }
    if (t != expect)
      throw InvalidStreamError("timestamp " + t_s + " on line " +
                               std::to_string(lineno) + ", expected " +
                               std::to_string(expect));
    ++expect;
    if (op_s == "noop") {
      out.push_back(UpdateEvent::noop_at(t));
      continue;
    }
    ItemId item = 0;
    try {
      item = static_cast<ItemId>(std::stoul(item_s));
    } catch (const std::exception&) {
      throw InvalidStreamError("bad item on line " + std::to_string(lineno));
    }
    if (op_s == "ins")
      out.push_back(UpdateEvent::ins(t, item));
    else if (op_s == "del")
      out.push_back(UpdateEvent::del(t, item));
    else
      throw InvalidStreamError("unknown op '" + op_s + "' on line " +
                               std::to_string(lineno));
  }
  return out;
}

// --- release serialization ------------------------------------------------
//
// Per-query releases: `query_index,answer` lines.  Synthetic histograms:
// `item,weight` lines.

inline void write_release(std::ostream& os, const Release& r) {
  if (r.kind == Release::Kind::synthetic_histogram) {
    for (std::size_t x = 0; x < r.histogram.size(); ++x)
      os << x << ',' << fmt_double(r.histogram[x]) << '\n';
  } else {
    for (std::size_t i = 0; i < r.answers.size(); ++i)
      os << i << ',' << fmt_double(r.answers[i]) << '\n';
  }
}

// --- run reports ----------------------------------------------------------

struct ReportRow {
  Timestamp t = 0;
  std::uint64_t updates = 0;  // N_t
  std::uint64_t live = 0;     // n_t
  std::uint64_t query_id = 0;
  double estimate = 0.0;
  double exact = 0.0;
  double abs_error = 0.0;
  double theory_bound = 0.0;
};

inline constexpr const char* kReportHeader =
    "t,N_t,n_t,query_id,estimate,exact,abs_error,theory_bound";

inline void write_report(std::ostream& os,
                         const std::vector<ReportRow>& rows) {
  os << kReportHeader << '\n';
  for (const auto& r : rows)
    os << r.t << ',' << r.updates << ',' << r.live << ',' << r.query_id << ','
       << fmt_double(r.estimate) << ',' << fmt_double(r.exact) << ','
       << fmt_double(r.abs_error) << ',' << fmt_double(r.theory_bound)
       << '\n';
}

inline std::vector<ReportRow> read_report(std::istream& is) {
  std::vector<ReportRow> rows;
  std::string line;
  if (!std::getline(is, line) || line != kReportHeader)
    throw std::runtime_error("missing report header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    ReportRow r;
    std::string f;
    auto next = [&] {
      if (!std::getline(ss, f, ',')) throw std::runtime_error("short row");
      return f;
    };
    r.t = std::stoull(next());
    r.updates = std::stoull(next());
    r.live = std::stoull(next());
    r.query_id = std::stoull(next());
    r.estimate = std::stod(next());
    r.exact = std::stod(next());
    r.abs_error = std::stod(next());
    r.theory_bound = std::stod(next());
    rows.push_back(r);
  }
  return rows;
}

}  // namespace dpcr
