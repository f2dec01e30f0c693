#ifndef AUXGMM_REPORT_HPP
#define AUXGMM_REPORT_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "auxgmm/estimators.hpp"
#include "auxgmm/simulate.hpp"

namespace auxgmm {

extern const char* const kVersion;

enum class ReportStyle { Json, Table };

/// How estimates are laid out in a table: one row per parameter, one column
/// per estimator. CDF models print point estimates and standard errors times
/// 100 with 2 and 3 decimals (`34.06 (0.067)`); other models print raw values
/// with 4 decimals.
struct TableLayout {
  std::string title;
  std::vector<std::string> row_labels;
  double scale = 1.0;
  int estimate_decimals = 4;
  int se_decimals = 4;
};

TableLayout table_layout(const MomentModel& moment);

nlohmann::json estimate_json(const Estimate& est);
std::string format_table(const std::vector<Estimate>& estimates, const TableLayout& layout);
/// JSON (one object for a single estimate, {"estimates": [...]} otherwise) or
/// the fixed-width table.
std::string format_report(const std::vector<Estimate>& estimates, ReportStyle style,
                          const MomentModel& moment);

nlohmann::json mc_report_json(const MCReport& report);
std::string format_mc_table(const MCReport& report);

}  // namespace auxgmm

#endif  // AUXGMM_REPORT_HPP
