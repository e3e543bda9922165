#pragma once

// RTTM speaker-segment text format. One segment per line, exactly ten
// whitespace-separated fields:
//
//   SPEAKER <recording> <channel> <onset> <duration> <ortho> <stype>
//           <speaker> <confidence> <lookahead>
//
// The fifth field is a DURATION in seconds, not an end time. Unused fields
// hold "<NA>".

#include <string>

#include "sadiar/pipeline.hpp"

namespace sadiar {

// Parses RTTM text into segments in line order. Blank lines and ";;"
// comment lines are skipped. Every kept line must have exactly ten fields,
// start with "SPEAKER", carry finite non-negative onset/duration, and agree
// with the other lines on the recording id; violations raise DataError
// naming the 1-based line number. If recording_id is non-null it receives
// the common id ("" when no segment lines were present).
DiarSegmentList parse_rttm(const std::string& text,
                           std::string* recording_id = nullptr);

// Canonical emission at two-decimal precision, in segment order.
// emit_rttm(parse_rttm(x), id) reproduces x exactly when x is already in
// canonical form.
std::string emit_rttm(const DiarSegmentList& segments,
                      const std::string& recording_id = "rec");

}  // namespace sadiar
