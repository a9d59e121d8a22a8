#pragma once

#include <ostream>

#include "didkit/report.hpp"

namespace didkit {

/// Self-contained event-study figure: placebo estimates to the left of zero
/// (horizon h drawn at x = -2-h), the reference period pinned to zero at
/// x = -1, effect estimates to the right, all with confidence whiskers.
void write_event_study_svg(std::ostream& out, const EventStudyReport& report);

}  // namespace didkit
