#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "ssov/panel_data.hpp"
#include "test_util.hpp"

using namespace ssov;
using ssov_test::TempFile;

namespace {

CsvSchema toy_schema() {
  CsvSchema s;
  s.controls = {};
  s.add_intercept = false;
  s.shock_layout = "long";
  return s;
}

}  // namespace

TEST_CASE("load_csv toy file") {
  TempFile obs("toy_obs.csv",
               "unit,period,y,x,weight,cluster,sh_11,sh_12\n"
               "a,1,1.0,0.5,1.0,east,0.5,0.5\n"
               "b,1,2.0,0.25,1.0,west,1.0,0.0\n");
  TempFile shk("toy_shk.csv",
               "period,sector,z\n"
               "1,11,2.0\n"
               "1,12,-1.0\n");
  PanelDataset ds = load_csv(obs.path(), shk.path(), toy_schema());
  CHECK(ds.n == 2);
  CHECK(ds.T == 1);
  CHECK(ds.p == 2);
  CHECK(ds.d == 0);
  CHECK(ds.s_z[0](0, 0) == 0.5);
  CHECK(ds.s_z[0](1, 0) == 1.0);
  CHECK(ds.z(0, 0) == doctest::Approx(0.5 * 2.0 + 0.5 * -1.0));
  CHECK(ds.z(1, 0) == doctest::Approx(2.0));
}

TEST_CASE("load_csv rejects a negative share") {
  TempFile obs("neg_obs.csv",
               "unit,period,y,x,weight,cluster,sh_11,sh_12\n"
               "a,1,1.0,0.5,1.0,east,-0.1,0.5\n");
  TempFile shk("neg_shk.csv", "period,sector,z\n1,11,2.0\n1,12,-1.0\n");
  CHECK_THROWS_AS(load_csv(obs.path(), shk.path(), toy_schema()),
                  ValidationError);
}

TEST_CASE("load_csv error paths") {
  TempFile shk("err_shk.csv", "period,sector,z\n1,11,2.0\n1,12,-1.0\n");
  SUBCASE("missing column") {
    TempFile obs("err_obs1.csv",
                 "unit,period,y,weight,cluster,sh_11,sh_12\n"
                 "a,1,1.0,1.0,east,0.1,0.5\n");
    CHECK_THROWS_WITH_AS(load_csv(obs.path(), shk.path(), toy_schema()),
                         doctest::Contains("missing column 'x'"),
                         ValidationError);
  }
  SUBCASE("duplicate (unit,period)") {
    TempFile obs("err_obs2.csv",
                 "unit,period,y,x,weight,cluster,sh_11,sh_12\n"
                 "a,1,1.0,0.5,1.0,east,0.1,0.5\n"
                 "a,1,2.0,0.25,1.0,west,0.2,0.0\n");
    CHECK_THROWS_WITH_AS(load_csv(obs.path(), shk.path(), toy_schema()),
                         doctest::Contains("duplicate"), ValidationError);
  }
  SUBCASE("non-finite cell") {
    TempFile obs("err_obs3.csv",
                 "unit,period,y,x,weight,cluster,sh_11,sh_12\n"
                 "a,1,nan,0.5,1.0,east,0.1,0.5\n");
    CHECK_THROWS_WITH_AS(load_csv(obs.path(), shk.path(), toy_schema()),
                         doctest::Contains("non-finite"), ValidationError);
  }
  SUBCASE("unmatched sector code in shock file") {
    TempFile obs("err_obs4.csv",
                 "unit,period,y,x,weight,cluster,sh_11,sh_12\n"
                 "a,1,1.0,0.5,1.0,east,0.1,0.5\n");
    TempFile badshk("err_shk4.csv", "period,sector,z\n1,11,2.0\n1,99,-1.0\n");
    CHECK_THROWS_WITH_AS(load_csv(obs.path(), badshk.path(), toy_schema()),
                         doctest::Contains("unmatched sector code"),
                         ValidationError);
  }
  SUBCASE("share row sum above one") {
    TempFile obs("err_obs5.csv",
                 "unit,period,y,x,weight,cluster,sh_11,sh_12\n"
                 "a,1,1.0,0.5,1.0,east,0.7,0.5\n");
    CHECK_THROWS_WITH_AS(load_csv(obs.path(), shk.path(), toy_schema()),
                         doctest::Contains("exceeds 1"), ValidationError);
  }
}

TEST_CASE("paper-scale dimensions survive a save/load round trip") {
  // 722 commuting zones, 2 periods, 397 sectors.
  PanelDataset ds = ssov_test::random_dataset(722, 2, 397, 2, 7);
  CsvSchema s;
  s.controls = {"(intercept)", "w1"};
  s.share_x_prefix = "shx_";
  s.shock_x = "zx";
  save_csv(ds, "big_obs.csv", "big_shk.csv", s);
  PanelDataset back = load_csv("big_obs.csv", "big_shk.csv", s);
  std::remove("big_obs.csv");
  std::remove("big_shk.csv");

  CHECK(back.n == 722);
  CHECK(back.T == 2);
  CHECK(back.p == 397);
  CHECK(stack_panel(back).rows() == 1444);

  // Bit-for-bit on every finite payload.
  CHECK((back.y - ds.y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.x - ds.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.reg_weight - ds.reg_weight).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.shock_z - ds.shock_z).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.shock_x - ds.shock_x).cwiseAbs().maxCoeff() == 0.0);
  for (int t = 0; t < 2; ++t) {
    CHECK((back.s_z[t] - ds.s_z[t]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.w[t] - ds.w[t]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(back.obs_cluster == ds.obs_cluster);
  CHECK(back.sector_code == ds.sector_code);
}

TEST_CASE("aggregate_sic") {
  SUBCASE("two sectors collapse to their common 3-digit prefix") {
    PanelDataset ds = ssov_test::random_dataset(5, 1, 2, 1, 3);
    ds.sector_code = {"3711", "3714"};
    ds.sector_cluster = {"371", "371"};
    PanelDataset agg = aggregate_sic(ds, 3);
    CHECK(agg.p == 1);
    CHECK(agg.sector_code[0] == "371");
    Eigen::VectorXd expect = ds.s_z[0].col(0) + ds.s_z[0].col(1);
    CHECK((agg.s_z[0].col(0) - expect).cwiseAbs().maxCoeff() == 0.0);
    // Instrument untouched: it was built at the native level.
    CHECK((agg.z - ds.z).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("native level is the identity") {
    PanelDataset ds = ssov_test::random_dataset(4, 2, 6, 1, 4);
    PanelDataset agg = aggregate_sic(ds, 4);
    CHECK(agg.p == ds.p);
    CHECK(agg.aggregated_level == 0);
    CHECK((agg.s_z[0] - ds.s_z[0]).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("level exceeding code length errors") {
    PanelDataset ds = ssov_test::random_dataset(4, 1, 2, 1, 5);
    ds.sector_code = {"371", "372"};
    CHECK_THROWS_AS(aggregate_sic(ds, 4), ValidationError);
  }
  SUBCASE("397 sectors with a 136-prefix map give 136 columns") {
    PanelDataset ds = ssov_test::random_dataset(10, 2, 397, 1, 6);
    // 136 three-digit prefixes under 20 two-digit prefixes: 125 prefixes
    // carry 3 codes and 11 carry 2 (125*3 + 11*2 = 397); 16 two-digit
    // groups carry 7 prefixes and 4 carry 6 (16*7 + 4*6 = 136).
    std::vector<std::string> codes;
    int made3 = 0;
    for (int two = 0; two < 20 && static_cast<int>(codes.size()) < 397;
         ++two) {
      int n3 = two < 16 ? 7 : 6;
      for (int k = 0; k < n3; ++k, ++made3) {
        int per = made3 < 125 ? 3 : 2;
        for (int j = 0; j < per; ++j) {
          char code[8];
          std::snprintf(code, sizeof code, "%02d%d%d", 10 + two, k, j);
          codes.push_back(code);
        }
      }
    }
    REQUIRE(codes.size() == 397);
    ds.sector_code = codes;
    for (int j = 0; j < 397; ++j) ds.sector_cluster[j] = codes[j].substr(0, 3);
    PanelDataset a3 = aggregate_sic(ds, 3);
    CHECK(a3.p == 136);
    PanelDataset a2 = aggregate_sic(ds, 2);
    CHECK(a2.p == 20);

    // Row mass is preserved to 1e-12.
    for (int t = 0; t < ds.T; ++t) {
      Eigen::VectorXd before = ds.s_z[t].rowwise().sum();
      Eigen::VectorXd after = a3.s_z[t].rowwise().sum();
      CHECK((before - after).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("stack_panel") {
  SUBCASE("hand-built 2x2 panel matches explicit dot products") {
    PanelDataset ds = ssov_test::random_dataset(2, 2, 3, 1, 11);
    StackedDesign sd = stack_panel(ds);
    REQUIRE(sd.rows() == 4);
    for (int i = 0; i < 2; ++i)
      for (int t = 0; t < 2; ++t) {
        double dot = 0.0;
        for (int j = 0; j < 3; ++j) dot += ds.s_z[t](i, j) * ds.shock_z(t, j);
        CHECK(sd.z(i * 2 + t) == doctest::Approx(dot).epsilon(1e-12));
      }
  }
  SUBCASE("single period keeps unit order") {
    PanelDataset ds = ssov_test::random_dataset(5, 1, 3, 1, 12);
    StackedDesign sd = stack_panel(ds);
    for (int i = 0; i < 5; ++i) {
      CHECK(sd.unit_index[i] == i);
      CHECK(sd.y(i) == ds.y(i, 0));
    }
  }
  SUBCASE("group-by-period recovers the per-period matrices exactly") {
    PanelDataset ds = ssov_test::random_dataset(6, 3, 4, 2, 13);
    StackedDesign sd = stack_panel(ds);
    for (int t = 0; t < 3; ++t) {
      StackedDesign sub = restrict_to_period(sd, t);
      REQUIRE(sub.rows() == 6);
      for (int i = 0; i < 6; ++i) {
        CHECK(sub.y(i) == ds.y(i, t));
        CHECK(sub.x(i) == ds.x(i, t));
        CHECK((sub.S.row(i) - ds.s_z[t].row(i)).cwiseAbs().maxCoeff() == 0.0);
        CHECK((sub.W.row(i) - ds.w[t].row(i)).cwiseAbs().maxCoeff() == 0.0);
      }
    }
  }
}
