#pragma once

// Stored inputs for the summary-table renderers, read from
// tests/fixtures/report. Per-rater values are averaged unweighted.

#include <fstream>
#include <string>
#include <vector>

#include "qgen/text.hpp"
#include "qgen/valid.hpp"

namespace qgen_test {

inline std::vector<std::vector<std::string>> read_fixture_rows(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (!line.empty()) rows.push_back(qgen::text::split(line, '\t'));
  }
  return rows;
}

inline double mean_of_list(const std::string& csv) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : qgen::text::split(csv, ',')) {
    sum += std::stod(v);
    ++n;
  }
  return sum / n;
}

// Rendered rows of the three summary tables, in fixture order.
struct RenderedReports {
  std::vector<std::string> build, questionnaire, reliability;
};

inline RenderedReports render_report_fixtures(const std::string& dir) {
  RenderedReports out;
  for (const auto& r : read_fixture_rows(dir + "/table1.tsv")) {
    out.build.push_back(qgen::valid::format_row(qgen::valid::BuildRow{
        r.at(0), std::stoi(r.at(1)), std::stoi(r.at(2)), std::stoi(r.at(3)), std::stoi(r.at(4)),
        std::stod(r.at(5))}));
  }
  for (const auto& r : read_fixture_rows(dir + "/table2.tsv")) {
    out.questionnaire.push_back(qgen::valid::format_row(
        qgen::valid::QuestionnaireRow{r.at(0), std::stod(r.at(1)), mean_of_list(r.at(2))}));
  }
  for (const auto& r : read_fixture_rows(dir + "/reliability.tsv")) {
    out.reliability.push_back(
        qgen::valid::format_row(qgen::valid::ReliabilityRow{r.at(0), mean_of_list(r.at(1))}));
  }
  return out;
}

inline RenderedReports expected_report_rows() {
  return {{"Endometriosis\t172\t273\t75\t120\t0.74", "Lupus\t117\t344\t55\t93\t0.68",
           "Gout\t154\t247\t104\t104\t0.71"},
          {"Endometriosis\t0.60\t0.58", "Lupus\t0.61\t0.40", "Gout\t0.68\t0.27"},
          {"Endometriosis\t0.70", "Lupus\t0.95", "Gout\t0.66"}};
}

}  // namespace qgen_test
