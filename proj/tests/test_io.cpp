#include <gtest/gtest.h>

#include <cstdio>

#include "mflq/io.hpp"
#include "mflq/limit_riccati.hpp"

using namespace mflq;

namespace {

std::string config_path(const std::string& name) { return std::string(MFLQ_SOURCE_DIR) + "/configs/" + name; }

}  // namespace

TEST(Io, FormatsSeventeenDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(format_double(-1.5e-20), "-1.5000000000000001e-20");
  for (double v : {1.0 / 3.0, 3.5658172805168453, -2.506206015641273e10, 5e-324}) {
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
}

TEST(Io, CsvHeaderIsRowMajor) {
  EXPECT_EQ(csv_header(1, 1), "t,m_0_0");
  EXPECT_EQ(csv_header(2, 2), "t,m_0_0,m_0_1,m_1_0,m_1_1");
  EXPECT_EQ(csv_header(2, 1), "t,m_0_0,m_1_0");
}

TEST(Io, TrajectoryCsvAscendingTime) {
  auto lim = solve_limit(build_model(scalar_model("example1")));
  ASSERT_TRUE(lim.solved());
  const Table t = parse_csv(trajectory_csv(lim->Lambda1));
  ASSERT_EQ(t.columns, (std::vector<std::string>{"t", "m_0_0"}));
  ASSERT_EQ(t.rows.size(), lim->Lambda1.size());
  EXPECT_EQ(t.rows.front()[0], 0.0);
  EXPECT_EQ(t.rows.back()[0], 2.0);
  for (std::size_t k = 1; k < t.rows.size(); ++k) EXPECT_LT(t.rows[k - 1][0], t.rows[k][0]);
  EXPECT_EQ(t.rows.back()[1], 2.0);
  EXPECT_EQ(t.rows.front()[1], lim->Lambda1.front()(0, 0));
}

TEST(Io, MatrixEntriesRowMajor) {
  MatrixXd a(2, 2);
  a << 1, 2, 3, 4;
  const auto tr = MatrixTrajectory::from_samples({0.0, 0.5}, {a, 2 * a});
  EXPECT_EQ(trajectory_csv(tr), "t,m_0_0,m_0_1,m_1_0,m_1_1\n0,1,2,3,4\n0.5,2,4,6,8\n");
}

TEST(Io, TableRoundTrip) {
  const Table t{{"N", "gap"}, {{1, 0.25}, {2, 1.0 / 7.0}}};
  const Table back = parse_csv(table_csv(t));
  EXPECT_EQ(back.columns, t.columns);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_THROW(table_csv(Table{{"a"}, {{1, 2}}}), Error);
  EXPECT_THROW(parse_csv("a,b\n1,x\n"), Error);
}

TEST(Io, ConfigRoundTrip) {
  const Config c = load_config(config_path("two_dim.json"));
  EXPECT_EQ(c.params.n, 2);
  EXPECT_EQ(c.params.n1, 1);
  EXPECT_EQ(c.params.A(0, 1), 0.2);
  EXPECT_EQ(c.params.D0(1, 0), 0.2);
  ASSERT_TRUE(c.K.has_value());
  EXPECT_EQ((*c.K)(1), -0.2);
  EXPECT_EQ(c.law.sigma0(0, 0), 0.2);
  const Config back = config_from_json(config_to_json(c));
  EXPECT_EQ(back.params.Q, c.params.Q);
  EXPECT_EQ(back.params.B1, c.params.B1);
  EXPECT_EQ(back.params.T, c.params.T);
  EXPECT_EQ(*back.K, *c.K);
  EXPECT_EQ(back.law.mu0, c.law.mu0);
  EXPECT_NO_THROW(build_model(back.params));
}

TEST(Io, ShippedConfigsMatchPresets) {
  for (const std::string name : {"example1", "example2", "example3", "decoupled_m0"}) {
    const Config c = load_config(config_path(name + ".json"));
    const ModelParams p = scalar_model(name);
    EXPECT_EQ(model_to_json(c.params), model_to_json(p)) << name;
    EXPECT_EQ(c.law.mu0(0), 1.0);
    EXPECT_FALSE(c.K.has_value());
  }
}

TEST(Io, PresetConfigCarriesTerminalWeight) {
  EXPECT_FALSE(preset_config("example1").K.has_value());
  const Config p = preset_config("portfolio_lq");
  ASSERT_TRUE(p.K.has_value());
  EXPECT_EQ((*p.K)(0), -0.5);
  EXPECT_EQ(p.law.sigma0(0, 0), 0.0);
}

TEST(Io, ConfigErrors) {
  auto kind = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidArgument;
  };
  json j = model_to_json(scalar_model("example1"));
  EXPECT_EQ(kind("{not json"), ErrorKind::ConfigError);
  EXPECT_EQ(kind("[1, 2]"), ErrorKind::ConfigError);
  json missing = j;
  missing.erase("GammaF");
  EXPECT_EQ(kind(missing.dump()), ErrorKind::ConfigError);
  json bad_shape = j;
  bad_shape["A"] = json::array({1.0});
  EXPECT_EQ(kind(bad_shape.dump()), ErrorKind::ConfigError);
  json bad_n = j;
  bad_n["n"] = 0;
  EXPECT_EQ(kind(bad_n.dump()), ErrorKind::ConfigError);
  json bad_entry = j;
  bad_entry["Q"] = json::array({json::array({"four"})});
  EXPECT_EQ(kind(bad_entry.dump()), ErrorKind::ConfigError);
  json bad_k = j;
  bad_k["K"] = json::array({1.0, 2.0});
  EXPECT_EQ(kind(bad_k.dump()), ErrorKind::ConfigError);
  EXPECT_THROW(load_config("/nonexistent/model.json"), Error);
}

TEST(Io, WriteAndReadText) {
  const std::string path = ::testing::TempDir() + "mflq_io_text.csv";
  write_text(path, "t,m_0_0\n0,1\n");
  EXPECT_EQ(read_text(path), "t,m_0_0\n0,1\n");
  std::remove(path.c_str());
}
