#include "sadiar/rttm.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "sadiar/errors.hpp"

namespace sadiar {

namespace {

double parse_time(const std::string& field, long line_no, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || field.empty())
    throw DataError("rttm line " + std::to_string(line_no) + ": " + what +
                    " '" + field + "' is not a number");
  if (!std::isfinite(v) || v < 0.0)
    throw DataError("rttm line " + std::to_string(line_no) + ": " + what +
                    " must be finite and non-negative");
  return v;
}

}  // namespace

DiarSegmentList parse_rttm(const std::string& text,
                           std::string* recording_id) {
  DiarSegmentList out;
  std::string rec;
  std::istringstream lines(text);
  std::string line;
  long line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> fields;
    std::string f;
    while (ls >> f) fields.push_back(f);
    if (fields.empty()) continue;
    if (fields[0].rfind(";;", 0) == 0) continue;
    if (fields.size() != 10)
      throw DataError("rttm line " + std::to_string(line_no) + ": expected 10 fields, got " +
                      std::to_string(fields.size()));
    if (fields[0] != "SPEAKER")
      throw DataError("rttm line " + std::to_string(line_no) +
                      ": unsupported record type '" + fields[0] + "'");
    if (rec.empty())
      rec = fields[1];
    else if (fields[1] != rec)
      throw DataError("rttm line " + std::to_string(line_no) +
                      ": recording id '" + fields[1] +
                      "' disagrees with earlier '" + rec + "'");
    const double onset = parse_time(fields[3], line_no, "onset");
    const double dur = parse_time(fields[4], line_no, "duration");
    out.push_back(DiarSegment{fields[7], onset, onset + dur});
  }
  if (recording_id != nullptr) *recording_id = rec;
  return out;
}

std::string emit_rttm(const DiarSegmentList& segments,
                      const std::string& recording_id) {
  return to_rttm(segments, recording_id);
}

}  // namespace sadiar
