#include "nste/dataset.hpp"
#include "nste/envelope_design.hpp"
#include "nste/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace nste;

namespace fs = std::filesystem;

TEST(AuditBudget, EnforcesMinimumSize) {
    AuditBudget b;
    EXPECT_NO_THROW(b.validate());
    b.pairs = 50;
    EXPECT_THROW(b.validate(), ConfigError);
    b.pairs = 100;
    b.iterations = 100;
    EXPECT_THROW(b.validate(), ConfigError);
    const auto full = AuditBudget::full();
    EXPECT_EQ(full.pairs, 500);
    EXPECT_EQ(full.iterations, 4000);
    EXPECT_EQ(full.resolution, Resolution::paper);
    EXPECT_EQ(AuditBudget::from_json(full.to_json()).to_json(), full.to_json());
    EXPECT_THROW(AuditBudget::from_json({{"pairs", 10}}), ConfigError);
}

TEST(Audit, TransparentEnvelopeIsUnsafeWithoutTraining) {
    const auto dir = test::temp_dir("audit_identity");
    AuditBudget b;
    b.seed = 1;
    const auto v = audit_envelope(preset_envelope("identity"), b, dir);
    EXPECT_EQ(v.verdict, Verdict::unsafe);
    EXPECT_FALSE(v.trained_metrics.has_value());
    EXPECT_GE(v.attack_metrics.ssim, b.threshold);
    EXPECT_GE(v.attack_metrics.ssim, v.baseline_metrics.ssim);
    EXPECT_FALSE(v.reason.empty());
    EXPECT_TRUE(fs::exists(dir / "verdict.json"));
    for (const auto& e : v.evidence) EXPECT_TRUE(fs::exists(dir / e)) << e;
    const auto j = v.to_json();
    EXPECT_EQ(j.at("verdict"), "unsafe");
}

TEST(Sweep, SpecsAndLevels) {
    const auto nine = SweepSpec::nine_setup();
    EXPECT_EQ(nine.axes.size(), 3u);
    for (const auto& a : nine.axes) EXPECT_EQ(a.levels.size(), 3u);
    EXPECT_NO_THROW(SweepSpec::five_axis().validate());
    EXPECT_EQ(SweepSpec::from_json(nine.to_json()).to_json(), nine.to_json());

    const auto [k, j1] = apply_sweep_level(nine.base, 0.05, "blur.kernel_size", 9);
    EXPECT_EQ(k.kernel_size, 9);
    EXPECT_EQ(j1, 0.05);
    const auto [p, j2] = apply_sweep_level(nine.base, 0.05, "pose_jitter", 0.1);
    EXPECT_EQ(p, nine.base);
    EXPECT_EQ(j2, 0.1);
    EXPECT_THROW(apply_sweep_level(nine.base, 0.05, "colour", 1), ConfigError);

    SweepSpec bad = nine;
    bad.axes[0].levels = {9};
    bad.axes[0].parameter = "blur.kernel_size";
    bad.axes[0].levels = {4};
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Sweep, BaselineOnlySinglePoint) {
    const auto dir = test::temp_dir("sweep_point");
    SweepSpec s;
    s.base = preset_envelope("easy");
    s.axes = {{"k_A", {0.3, 0.9}}};
    AuditBudget b;
    b.seed = 2;
    const auto rep = parameter_sweep(s, b, dir, {false});
    ASSERT_EQ(rep.points.size(), 2u);
    EXPECT_TRUE(rep.points[0].error.empty());
    EXPECT_FALSE(rep.points[0].verdict.has_value());
    EXPECT_GT(rep.points[0].baseline.ssim, rep.points[1].baseline.ssim);
    EXPECT_TRUE(fs::exists(dir / "sweep.json"));
    EXPECT_TRUE(fs::exists(dir / "sweep.csv"));
    EXPECT_TRUE(fs::exists(dir / "strip_k_A.png"));
    EXPECT_TRUE(fs::exists(dir / "curve_k_A.svg"));
}

TEST(Sweep, FailingSetupIsIsolated) {
    const auto dir = test::temp_dir("sweep_error");
    SweepSpec s;
    s.base = preset_envelope("easy");
    s.axes = {{"L", {1.0, -1.0}}};
    AuditBudget b;
    const auto rep = parameter_sweep(s, b, dir, {false});
    ASSERT_EQ(rep.points.size(), 2u);
    EXPECT_TRUE(rep.points[0].error.empty());
    EXPECT_FALSE(rep.points[1].error.empty());
}

TEST(Design, TransparentOnlyRangeHasNoSafeDesign) {
    const auto dir = test::temp_dir("design_none");
    DesignRanges r;
    r.start = preset_envelope("identity");
    r.k_A_min = r.k_A_max = 0.0;
    r.k_t_min = r.k_t_max = 1.0;
    r.kernel_min = r.kernel_max = 1;
    AuditBudget b;
    b.seed = 3;
    const auto res = recommend_design(r, b, dir);
    EXPECT_FALSE(res.found);
    EXPECT_EQ(res.message, "no safe design in range");
    EXPECT_FALSE(res.trail.empty());
    for (const auto& v : res.trail) EXPECT_EQ(v.verdict, Verdict::unsafe);
    EXPECT_TRUE(fs::exists(dir / "design.json"));
}

TEST(Design, RangesValidate) {
    DesignRanges r;
    EXPECT_NO_THROW(r.validate());
    r.kernel_max = 4;
    EXPECT_THROW(r.validate(), ConfigError);
    r.kernel_max = 17;
    r.k_t_min = 0.0;
    EXPECT_THROW(r.validate(), ConfigError);
    EXPECT_EQ(DesignRanges::from_json(DesignRanges{}.to_json()).to_json(), DesignRanges{}.to_json());
}
