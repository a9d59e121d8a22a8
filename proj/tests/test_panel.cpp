#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "didkit/errors.hpp"
#include "didkit/panel.hpp"
#include "helpers.hpp"

using namespace didkit;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& body, const char* name) {
    path = std::string("didkit_test_") + name + ".csv";
    std::ofstream out(path, std::ios::binary);
    out << body;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("ingest: minimal well-formed file") {
  std::string body = "group,time,outcome,treatment\n";
  for (int g = 1; g <= 3; ++g) {
    for (int t = 1; t <= 4; ++t) {
      body += "s" + std::to_string(g) + "," + std::to_string(t) + "," +
              std::to_string(g * 10 + t) + ",0\n";
    }
  }
  TempCsv file(body, "minimal");
  Panel p = ingest_csv(file.path);
  CHECK(p.group_count() == 3);
  CHECK(p.period_count() == 4);
  CHECK(p.outcome(0, 1) == doctest::Approx(11.0));
  CHECK(p.outcome(2, 4) == doctest::Approx(34.0));
  CHECK(p.cell_size(1, 2) == doctest::Approx(1.0));
}

TEST_CASE("ingest: duplicate rows with identical treatment average into cell means") {
  std::string body =
      "group,time,outcome,treatment\n"
      "1,1,0,0\n1,2,1,0\n2,1,0,0\n2,2,3,0\n"
      "1,2,3,0\n";  // second row for (1,2), same treatment
  TempCsv file(body, "dups");
  Panel p = ingest_csv(file.path);
  CHECK(p.outcome(0, 2) == doctest::Approx(2.0));
  CHECK(p.cell_size(0, 2) == doctest::Approx(2.0));
  CHECK(p.cell_size(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("ingest: treatment varying within a cell violates the sharp design") {
  std::string body =
      "group,time,outcome,treatment\n"
      "1,1,0,0\n1,2,1,0\n1,2,3,1\n2,1,0,0\n2,2,0,0\n";
  TempCsv file(body, "sharp");
  CHECK_THROWS_WITH_AS(ingest_csv(file.path),
                       doctest::Contains("sharp design violated at (1,2)"),
                       validation_error);
}

TEST_CASE("ingest: unbalanced panel is a hard error naming the missing cell") {
  std::string body =
      "group,time,outcome,treatment\n"
      "a,1,0,0\na,2,1,0\nb,1,0,0\n";
  TempCsv file(body, "unbalanced");
  CHECK_THROWS_WITH_AS(ingest_csv(file.path), doctest::Contains("(b,2)"),
                       validation_error);
}

TEST_CASE("ingest: period gaps are an error") {
  std::string body =
      "group,time,outcome,treatment\n"
      "a,1,0,0\na,3,1,0\nb,1,0,0\nb,3,0,0\n";
  TempCsv file(body, "gaps");
  CHECK_THROWS_WITH_AS(ingest_csv(file.path), doctest::Contains("consecutive"),
                       validation_error);
}

TEST_CASE("ingest: custom column names and weight column") {
  std::string body =
      "st,yr,y,d,pop\n"
      "a,1994,1.5,0,10\na,1995,2.5,1,10\nb,1994,1,0,30\nb,1995,1,0,30\n";
  TempCsv file(body, "cols");
  ColumnMap cols;
  cols.group = "st";
  cols.time = "yr";
  cols.outcome = "y";
  cols.treatment = "d";
  cols.weight = "pop";
  Panel p = ingest_csv(file.path, cols);
  CHECK(p.periods[0] == 1994);
  CHECK(p.cell_size(1, 1) == doctest::Approx(30.0));
  CHECK(p.outcome(0, 2) == doctest::Approx(2.5));

  ColumnMap missing = cols;
  missing.weight = "nope";
  CHECK_THROWS_AS(ingest_csv(file.path, missing), validation_error);
}

TEST_CASE("ingest: weighted duplicates pool by weight") {
  std::string body =
      "group,time,outcome,treatment,w\n"
      "a,1,0,0,1\na,2,4,1,3\na,2,0,1,1\n"
      "b,1,0,0,1\nb,2,0,0,1\n";
  TempCsv file(body, "wdups");
  ColumnMap cols;
  cols.weight = "w";
  Panel p = ingest_csv(file.path, cols);
  CHECK(p.outcome(0, 2) == doctest::Approx(3.0));  // (3*4 + 1*0)/4
  CHECK(p.cell_size(0, 2) == doctest::Approx(4.0));
}

TEST_CASE("validate: discount range and positive cell sizes") {
  Panel p = testing::toy_panel();
  CHECK_NOTHROW(p.validate());
  p.discount = 0.0;
  CHECK_THROWS_AS(p.validate(), validation_error);
  p.discount = 1.0;
  p.set_cell_size(0, 1, 0.0);
  CHECK_THROWS_AS(p.validate(), validation_error);
}

TEST_CASE("format_double round-trips") {
  for (double v : {1.75, -0.333333333333333314, 1e-300, 2.625, 0.0}) {
    CHECK(parse_double(format_double(v), "test") == v);
  }
  double nan = parse_double("nan", "test");
  CHECK(nan != nan);
}
