#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "gsae/dataset.hpp"
#include "test_support.hpp"

using namespace gsae;
using test_support::datasets_bit_equal;
using test_support::make_random_dataset;

namespace {

ActivationDataset small_dataset() {
  ActivationDataset ds;
  ds.activations.resize(2, 3);
  ds.activations << 1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f;
  ds.labels.resize(2, 2);
  ds.labels << 1.0f, 0.0f, 0.25f, 0.75f;
  ds.concept_names = {"a", "b"};
  return ds;
}

std::string serialize(const ActivationDataset& ds) {
  std::ostringstream out(std::ios::binary);
  write_dataset(ds, out);
  return out.str();
}

}  // namespace

TEST_CASE("gsad round trip is bit exact over random datasets") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ActivationDataset ds = make_random_dataset(seed);
    std::stringstream stream(std::ios::in | std::ios::out | std::ios::binary);
    const std::size_t bytes = write_dataset(ds, stream);
    CHECK(bytes == stream.str().size());
    const ActivationDataset back = read_dataset(stream);
    CHECK(datasets_bit_equal(ds, back));
  }
}

TEST_CASE("empty dataset writes a fixed-size header-only payload") {
  ActivationDataset ds;
  ds.activations.resize(0, 4);
  ds.labels.resize(0, 1);
  ds.concept_names = {"only"};
  const std::string bytes = serialize(ds);
  // header + trailer length + {"concept_names":["only"]}
  CHECK(bytes.size() == 21 + 4 + 26);

  std::istringstream in(bytes, std::ios::binary);
  const ActivationDataset back = read_dataset(in);
  CHECK(back.n_rows() == 0);
  CHECK(back.dim() == 4);
  CHECK(back.concept_names == std::vector<std::string>{"only"});
}

TEST_CASE("byte count follows the container layout") {
  const ActivationDataset ds = small_dataset();
  std::ostringstream out(std::ios::binary);
  const std::size_t bytes = write_dataset(ds, out);
  const std::size_t trailer = std::string("{\"concept_names\":[\"a\",\"b\"]}").size();
  CHECK(bytes == 21 + 2 * 3 * 4 + 2 * 2 * 4 + 4 + trailer);
  CHECK(bytes == 92);
}

TEST_CASE("wrong magic is a format error") {
  std::string bytes = serialize(small_dataset());
  bytes[3] = 'E';  // GSAD -> GSAE
  std::istringstream in(bytes, std::ios::binary);
  CHECK_THROWS_AS(read_dataset(in), FormatError);
}

TEST_CASE("unsupported version is rejected") {
  std::string bytes = serialize(small_dataset());
  bytes[4] = 2;
  std::istringstream in(bytes, std::ios::binary);
  CHECK_THROWS_AS(read_dataset(in), UnsupportedVersionError);
}

TEST_CASE("stream cut mid-activations names expected and available byte counts") {
  const std::string bytes = serialize(small_dataset());
  // 21-byte header, then 24 activation bytes; cut 10 bytes into them.
  std::istringstream in(bytes.substr(0, 31), std::ios::binary);
  try {
    read_dataset(in);
    FAIL("expected CorruptionError");
  } catch (const CorruptionError& e) {
    const std::string message = e.what();
    CHECK(message.find("activations") != std::string::npos);
    CHECK(message.find("24") != std::string::npos);
    CHECK(message.find("10") != std::string::npos);
  }
}

TEST_CASE("write rejects invariant violations") {
  ActivationDataset ds = small_dataset();
  std::ostringstream sink(std::ios::binary);

  SUBCASE("non-finite activation") {
    ds.activations(0, 0) = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(write_dataset(ds, sink), ValidationError);
  }
  SUBCASE("label out of range") {
    ds.labels(0, 0) = 1.5f;
    CHECK_THROWS_AS(write_dataset(ds, sink), ValidationError);
  }
  SUBCASE("duplicate concept names") {
    ds.concept_names = {"a", "a"};
    CHECK_THROWS_AS(write_dataset(ds, sink), ValidationError);
  }
}

namespace {

ActivationDataset labeled_dataset(int positives, int negatives) {
  ActivationDataset ds;
  const int n = positives + negatives;
  ds.activations.resize(n, 2);
  ds.labels.resize(n, 1);
  for (int r = 0; r < n; ++r) {
    ds.activations(r, 0) = static_cast<float>(r);
    ds.activations(r, 1) = static_cast<float>(r * r);
    ds.labels(r, 0) = r < positives ? 1.0f : 0.0f;
  }
  ds.concept_names = {"c"};
  return ds;
}

}  // namespace

TEST_CASE("stratified split keeps the class balance") {
  const ActivationDataset ds = labeled_dataset(5, 5);
  auto [train, eval] = split_stratified(ds, 0.2, 0, 99);
  CHECK(eval.n_rows() == 2);
  CHECK(train.n_rows() == 8);
  const auto eval_pos = (eval.labels.col(0).array() >= 0.5f).count();
  CHECK(eval_pos == 1);
}

TEST_CASE("stratified split is deterministic and partitions the rows") {
  const ActivationDataset ds = labeled_dataset(7, 13);
  const auto y = binarize_labels(ds.labels, 0);
  auto [train_a, eval_a] = split_stratified_indices(y, 0.25, 1234);
  auto [train_b, eval_b] = split_stratified_indices(y, 0.25, 1234);
  CHECK(train_a == train_b);
  CHECK(eval_a == eval_b);

  std::vector<Eigen::Index> merged = train_a;
  merged.insert(merged.end(), eval_a.begin(), eval_a.end());
  std::sort(merged.begin(), merged.end());
  std::vector<Eigen::Index> expected(static_cast<std::size_t>(ds.n_rows()));
  for (std::size_t i = 0; i < expected.size(); ++i) expected[i] = static_cast<Eigen::Index>(i);
  CHECK(merged == expected);
}

TEST_CASE("stratified split positive rate stays within one row of the full rate") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const int pos = 4 + static_cast<int>(rng() % 40);
    const int neg = 4 + static_cast<int>(rng() % 40);
    const auto ds = labeled_dataset(pos, neg);
    const auto y = binarize_labels(ds.labels, 0);
    auto [train, eval] = split_stratified_indices(y, 0.3, seed);

    const double full_rate = static_cast<double>(pos) / (pos + neg);
    for (const auto& part : {train, eval}) {
      const auto part_pos = std::count_if(part.begin(), part.end(), [&](Eigen::Index r) {
        return y[static_cast<std::size_t>(r)] != 0;
      });
      const double rate = static_cast<double>(part_pos) / static_cast<double>(part.size());
      CHECK(std::abs(rate - full_rate) <= 1.0 / static_cast<double>(part.size()));
    }
  }
}

TEST_CASE("too small eval fraction leaves a stratum empty") {
  const ActivationDataset ds = labeled_dataset(5, 5);
  CHECK_THROWS_AS(split_stratified(ds, 0.05, 0, 1), ConfigError);
}

TEST_CASE("oversampling balances 8/2 by duplicating the positives") {
  const ActivationDataset ds = labeled_dataset(2, 8);
  const ActivationDataset balanced = oversample_minority(ds, 0, 5);
  CHECK(balanced.n_rows() == 16);
  const auto pos = (balanced.labels.col(0).array() >= 0.5f).count();
  CHECK(pos == 8);
  // Originals first, in order; appended rows are copies of the two positives.
  CHECK(balanced.activations.topRows(10) == ds.activations);
  for (Eigen::Index r = 10; r < 16; ++r) {
    const bool copy_of_0 = balanced.activations.row(r) == ds.activations.row(0);
    const bool copy_of_1 = balanced.activations.row(r) == ds.activations.row(1);
    CHECK((copy_of_0 || copy_of_1));
  }
}

TEST_CASE("oversampling an already balanced dataset is the identity") {
  const ActivationDataset ds = labeled_dataset(5, 5);
  const ActivationDataset out = oversample_minority(ds, 0, 7);
  CHECK(datasets_bit_equal(ds, out));
}

TEST_CASE("single-class oversampling is a validation error") {
  const ActivationDataset ds = labeled_dataset(0, 10);
  CHECK_THROWS_AS(oversample_minority(ds, 0, 7), ValidationError);
}

TEST_CASE("oversampling preserves the set of distinct rows and balances counts") {
  for (std::uint64_t seed = 1; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto ds =
        labeled_dataset(1 + static_cast<int>(rng() % 9), 1 + static_cast<int>(rng() % 9));
    const auto out = oversample_minority(ds, 0, seed);

    auto keys = [](const ActivationDataset& d) {
      std::map<std::pair<float, float>, int> rows;
      for (Eigen::Index r = 0; r < d.n_rows(); ++r) {
        rows[{d.activations(r, 0), d.labels(r, 0)}] = 1;
      }
      return rows;
    };
    CHECK(keys(ds) == keys(out));

    const auto pos = (out.labels.col(0).array() >= 0.5f).count();
    CHECK(pos * 2 == out.n_rows());
  }
}

TEST_CASE("save and load round trip through the filesystem") {
  test_support::TempDir dir;
  const ActivationDataset ds = small_dataset();
  save_dataset(ds, dir.file("x.gsad"));
  const ActivationDataset back = load_dataset(dir.file("x.gsad"));
  CHECK(datasets_bit_equal(ds, back));
}

TEST_CASE("loading a missing file names the path") {
  try {
    load_dataset("/nonexistent/missing.gsad");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("missing.gsad") != std::string::npos);
  }
}
