#include <gtest/gtest.h>

#include "csteer/config.hpp"

using namespace csteer;

TEST(Config, EmptyFileGivesDefaults) {
  const auto c = parse_config("");
  EXPECT_EQ(c.mechanisms.size(), 5u);
  EXPECT_EQ(c.alpha_grid, default_alpha_grid());
  EXPECT_EQ(c.beta_c_grid, default_beta_c_grid());
  EXPECT_EQ(c.beta_add_grid, default_beta_add_grid());
  EXPECT_EQ(c.n_seeds, 5u);
  EXPECT_EQ(c.n_test, 1000);
  EXPECT_TRUE(std::holds_alternative<SyntheticSourceConfig>(c.source));
}

TEST(Config, ParsesEveryField) {
  const auto c = parse_config(R"(
mechanisms = ["conceptor", "additive_mc"]
layers = [9, 10, 11]
alpha_grid = [0.05]
beta_c_grid = [1, 2.5]
beta_add_grid = [3]
n_test = 100
n_seeds = 2
master_seed = 42
source_task = "a"
target_task = "b"
output_dir = "runs/x"

[source]
kind = "synthetic"
dim = 16
subspace_rank = 2
centroid_norm = 9.5
within_task_std = 0.5
noise_std = 0.25
shared_offset_norm = 3.0
seed = 8
n_tasks = 4
n_train = 50
n_baseline = 60
)");
  EXPECT_EQ(c.mechanisms, (std::vector<MechanismKind>{MechanismKind::conceptor, MechanismKind::additive_mc}));
  EXPECT_EQ(c.layers, (std::vector<std::uint64_t>{9, 10, 11}));
  EXPECT_EQ(c.beta_c_grid, (std::vector<double>{1.0, 2.5}));
  EXPECT_EQ(c.beta_add_grid, (std::vector<double>{3.0}));
  EXPECT_EQ(c.n_test, 100);
  EXPECT_EQ(c.master_seed, 42u);
  EXPECT_EQ(c.source_task, "a");
  EXPECT_EQ(c.output_dir, "runs/x");
  const auto& s = std::get<SyntheticSourceConfig>(c.source);
  EXPECT_EQ(s.spec.dim, 16);
  EXPECT_EQ(s.spec.subspace_rank, 2);
  EXPECT_EQ(s.spec.centroid_norm, 9.5);
  EXPECT_EQ(s.spec.shared_offset_norm, 3.0);
  EXPECT_EQ(s.spec.seed, 8u);
  EXPECT_EQ(s.n_tasks, 4u);
  EXPECT_EQ(s.n_baseline, 60);
}

TEST(Config, ParsesCacheSource) {
  const auto c = parse_config(R"(
[source]
kind = "cache"
files = ["a.actcache", "b.actcache"]
baseline_task = "neutral"
train_fraction = 0.75
)");
  const auto& s = std::get<CacheSourceConfig>(c.source);
  EXPECT_EQ(s.files.size(), 2u);
  EXPECT_EQ(s.baseline_task, "neutral");
  EXPECT_EQ(s.train_fraction, 0.75);
}

TEST(Config, RejectsInvalidInput) {
  EXPECT_THROW(parse_config("n_seed = 3"), ValidationError);
  EXPECT_THROW(parse_config("n_seeds = 0"), ValidationError);
  EXPECT_THROW(parse_config("n_seeds = -1"), ValidationError);
  EXPECT_THROW(parse_config("n_seeds = \"five\""), ValidationError);
  EXPECT_THROW(parse_config("mechanisms = [\"warp\"]"), ValidationError);
  EXPECT_THROW(parse_config("alpha_grid = []"), ValidationError);
  EXPECT_THROW(parse_config("alpha_grid = [0.1, \"x\"]"), ValidationError);
  EXPECT_THROW(parse_config("[source]\nkind = \"hdf5\""), ValidationError);
  EXPECT_THROW(parse_config("[source]\nkind = \"cache\""), ValidationError);
  EXPECT_THROW(parse_config("[source]\ndim = 4\nextra = 1"), ValidationError);
  EXPECT_THROW(parse_config("this is not toml"), ValidationError);
  EXPECT_THROW(load_config("/nonexistent/config.toml"), IoError);
}

TEST(Config, GridsOnlyNeededForMechanismsThatUseThem) {
  EXPECT_NO_THROW(parse_config("mechanisms = [\"additive\"]\nalpha_grid = []\nbeta_c_grid = []"));
  EXPECT_THROW(parse_config("mechanisms = [\"additive\"]\nbeta_add_grid = []"), ValidationError);
}
