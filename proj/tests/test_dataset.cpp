#include <door/dataset.hpp>
#include <door/simulation.hpp>

#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "oracles.hpp"

using namespace door;

namespace {

// unique temp file, removed on destruction
struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents = "") {
    static int counter = 0;
    path = (std::filesystem::temp_directory_path() /
            ("door_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".csv"))
               .string();
    if (!contents.empty()) {
      std::ofstream f(path);
      f << contents;
    }
  }
  ~TempFile() { std::remove(path.c_str()); }
};

CsvSchema basic_schema() {
  CsvSchema s;
  s.outcome_column = "y";
  s.treatment_column = "z";
  s.covariate_columns = {"x"};
  return s;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("minimal well-formed file loads") {
  TempFile f("y,z,x\n1,0,0.5\n2,1,-0.25\n1,1,1.5\n2,0,2\n");
  const DoorDataset ds = load_csv(f.path, basic_schema(), 2);
  CHECK(ds.n() == 4);
  CHECK(ds.levels() == 2);
  CHECK(ds.arm_size(0) == 2);
  CHECK(ds.arm_size(1) == 2);
  CHECK(ds.covariates()(3, 0) == 2.0);
}

TEST_CASE("outcome outside declared range names the offending line") {
  TempFile f("y,z,x\n1,0,0.5\n5,1,1.0\n2,0,1.0\n");
  try {
    load_csv(f.path, basic_schema(), 4);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    CHECK(std::string(e.what()).find("5") != std::string::npos);
  }
}

TEST_CASE("single-arm data is rejected") {
  TempFile f("y,z,x\n1,1,0.5\n2,1,1.0\n1,1,2.0\n");
  CHECK_THROWS_WITH_AS(load_csv(f.path, basic_schema(), 2),
                       doctest::Contains("single-arm"), ValidationError);
}

TEST_CASE("missing cells reject by default and drop under complete-case") {
  TempFile f("y,z,x\n1,0,0.5\n2,1,NA\n1,1,2.0\n2,0,1.0\n");
  CHECK_THROWS_WITH_AS(load_csv(f.path, basic_schema(), 2), doctest::Contains("line 3"),
                       ValidationError);
  LoadOptions opts;
  opts.complete_case = true;
  Index dropped = 0;
  const DoorDataset ds = load_csv(f.path, basic_schema(), 2, opts, &dropped);
  CHECK(ds.n() == 3);
  CHECK(dropped == 1);
}

TEST_CASE("non-numeric cells are an error even under complete-case") {
  TempFile f("y,z,x\n1,0,0.5\n2,1,oops\n");
  LoadOptions opts;
  opts.complete_case = true;
  CHECK_THROWS_WITH_AS(load_csv(f.path, basic_schema(), 2, opts),
                       doctest::Contains("non-numeric"), ValidationError);
}

TEST_CASE("missing columns and non-integer outcomes are rejected") {
  TempFile f("y,z,x\n1.5,0,0.5\n2,1,1\n");
  CHECK_THROWS_WITH_AS(load_csv(f.path, basic_schema(), 2),
                       doctest::Contains("integer-valued"), ValidationError);
  CsvSchema bad = basic_schema();
  bad.covariate_columns = {"nope"};
  CHECK_THROWS_WITH_AS(load_csv(f.path, bad, 2), doctest::Contains("nope"), ValidationError);
}

TEST_CASE("write then load is the identity") {
  SimConfig config;
  config.n = 120;
  config.seed = 404;
  const DoorDataset ds = gen_dataset(config, 0);
  TempFile f;
  write_csv(ds, f.path);
  CsvSchema schema;
  schema.outcome_column = "outcome";
  schema.treatment_column = "treatment";
  schema.covariate_columns = ds.covariate_names();
  const DoorDataset back = load_csv(f.path, schema, ds.levels());
  CHECK(back.n() == ds.n());
  CHECK((back.outcome() - ds.outcome()).lpNorm<Eigen::Infinity>() == 0);
  CHECK((back.treatment() - ds.treatment()).lpNorm<Eigen::Infinity>() == 0);
  CHECK((back.covariates() - ds.covariates()).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("summarize counts and means") {
  IntVector y(5), z(5);
  y << 1, 2, 2, 1, 3;
  z << 1, 1, 1, 0, 0;
  Matrix x(5, 1);
  x << 0.5, 1.5, 2.5, -1.0, 3.0;
  const DoorDataset ds(y, z, x, {"x"}, 4);
  const DatasetSummary s = summarize(ds);
  CHECK(s.arms[1].size == 3);
  CHECK(s.arms[0].size == 2);
  CHECK(s.arms[1].level_counts.sum() == 3);
  CHECK(s.arms[0].level_counts.sum() == 2);
  // empty level reported as zero, not omitted
  CHECK(s.arms[1].level_counts[3] == 0);
  CHECK(s.arms[0].level_counts[1] == 0);
  CHECK(s.arms[1].covariate_means[0] == doctest::Approx(1.5));
  CHECK(s.arms[0].covariate_means[0] == doctest::Approx(1.0));
}

TEST_CASE("summarize covariate means match a streaming oracle") {
  SimConfig config;
  config.n = 500;
  config.seed = 7;
  const DoorDataset ds = gen_dataset(config, 3);
  const DatasetSummary s = summarize(ds);
  for (int arm = 0; arm < 2; ++arm) {
    // Welford running means, one covariate at a time
    for (Index j = 0; j < ds.num_covariates(); ++j) {
      double mean = 0.0;
      long count = 0;
      for (Index i = 0; i < ds.n(); ++i) {
        if (ds.treatment()[i] != arm) continue;
        ++count;
        mean += (ds.covariates()(i, j) - mean) / static_cast<double>(count);
      }
      CHECK(std::abs(s.arms[static_cast<size_t>(arm)].covariate_means[j] - mean) <= 1e-12);
    }
  }
}

TEST_CASE("cohort-shaped dataset summarizes to its arm sizes") {
  // shape of the motivating study: n=2333, arms 1714/619, K=4
  const Index n = 2333, treated = 619;
  IntVector y(n), z(n);
  RngStream rng(5);
  for (Index i = 0; i < n; ++i) {
    z[i] = i < treated ? 1 : 0;
    y[i] = 1 + static_cast<Index>(rng.uniform() * 4);
  }
  const DoorDataset ds(y, z, Matrix::Zero(n, 0), {}, 4);
  const DatasetSummary s = summarize(ds);
  CHECK(s.arms[1].size == 619);
  CHECK(s.arms[0].size == 1714);
  CHECK(s.arms[0].level_counts.sum() + s.arms[1].level_counts.sum() == 2333);
}

TEST_CASE("dichotomize collapses and validates") {
  IntVector y(4), z(4);
  y << 1, 2, 3, 4;
  z << 0, 1, 0, 1;
  const DoorDataset ds(y, z, Matrix::Zero(4, 0), {}, 4);
  const DoorDataset cut3 = dichotomize(ds, 3);
  CHECK(cut3.levels() == 2);
  CHECK(cut3.outcome()[0] == 1);
  CHECK(cut3.outcome()[2] == 2);
  CHECK_THROWS_AS(dichotomize(ds, 1), ValidationError);
  CHECK_THROWS_AS(dichotomize(ds, 5), ValidationError);

  IntVector all_low(4);
  all_low << 1, 1, 2, 2;
  const DoorDataset ds2(all_low, z, Matrix::Zero(4, 0), {}, 4);
  CHECK_THROWS_WITH_AS(dichotomize(ds2, 3), doctest::Contains("degenerate"), ValidationError);
}

TEST_CASE("model spec validation") {
  IntVector y(4), z(4);
  y << 1, 2, 1, 2;
  z << 0, 1, 0, 1;
  Matrix x(4, 1);
  x << 1, 2, 3, 4;
  const DoorDataset ds(y, z, x, {"x"}, 2);
  ModelSpec spec;
  spec.propensity_covariates = {"x"};
  CHECK_NOTHROW(spec.validate(ds));
  spec.clip = 0.6;
  CHECK_THROWS_AS(spec.validate(ds), ValidationError);
  spec.clip = 0.0;
  spec.outcome_covariates = {"ghost"};
  CHECK_THROWS_AS(spec.validate(ds), ValidationError);
}

}  // TEST_SUITE
