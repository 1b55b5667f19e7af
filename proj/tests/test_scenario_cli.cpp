#include <pcac/scenario.hpp>
#include <pcac/trace_io.hpp>

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#ifndef PCAC_SCENARIO_DIR
#error "PCAC_SCENARIO_DIR must point at the shipped scenario fixtures"
#endif

namespace {

const char* const kFixtures[] = {"linear_alt_bank", "linear_alt_azimuth", "nonlinear_alt", "nonlinear_alt_speed"};

std::string fixture_text(const std::string& name)
{
    std::ifstream in(std::string(PCAC_SCENARIO_DIR) + "/" + name + ".json");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

pcac::Scenario fixture(const std::string& name) { return pcac::parse_scenario(fixture_text(name)); }

std::vector<std::string> parse_errors(const std::string& text)
{
    try {
        (void)pcac::parse_scenario(text);
    } catch (const pcac::ScenarioError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle)
{
    for (const auto& e : errs) {
        if (e.find(needle) != std::string::npos) {
            return true;
        }
    }
    return false;
}

const char* kMinimal = R"({
  "name": "tiny", "sample_time": 0.05, "steps": 3,
  "plant": {"type": "lti", "outputs": ["y"], "inputs": ["u"],
            "lti": {"A": [[-1]], "B": [[1]], "C": [[1]]}},
  "loops": [{"name": "main", "outputs": ["y"], "inputs": ["u"], "tracked": ["y"],
             "order": 2, "horizon": 5, "q_bar": 1, "p_bar": 1, "r": 0.1,
             "u_max": 1, "du_max": 0.2, "psi0": 100,
             "commands": {"y": [[0, 0], [0.1, 1]]}}]
})";

std::string with_replacement(std::string text, const std::string& from, const std::string& to)
{
    const auto pos = text.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return text.replace(pos, from.size(), to);
}

} // namespace

TEST(ParseScenario, AltitudeBankFixture)
{
    const auto s = fixture("linear_alt_bank");
    ASSERT_EQ(s.loops.size(), 2u);
    const auto cfg = pcac::build_loop_config(s, 0);
    EXPECT_EQ(cfg.dims.theta_size(), 36);
    EXPECT_EQ(cfg.dims.order, 6);
    EXPECT_EQ(cfg.horizon, 40);
    EXPECT_EQ(cfg.weights.q_bar, 0.1 * pcac::Matrix::Identity(39, 39));
    EXPECT_EQ(cfg.psi0_scale, 1e5);
    EXPECT_FALSE(cfg.forgetting.enabled);
}

TEST(ParseScenario, NonlinearAltitudeForgetting)
{
    const auto s = fixture("nonlinear_alt");
    const auto cfg = pcac::build_loop_config(s, 0);
    EXPECT_TRUE(cfg.forgetting.enabled);
    EXPECT_EQ(cfg.forgetting.eta, 0.025);
    EXPECT_EQ(cfg.forgetting.short_window, 40);
    EXPECT_EQ(cfg.forgetting.long_window, 200);
    EXPECT_EQ(cfg.forgetting.significance, 0.001);
    EXPECT_EQ(cfg.dims.theta_size(), 60);
}

TEST(ParseScenario, EmptyFileListsRequiredKeys)
{
    const auto errs = parse_errors("");
    for (const char* key : {"name", "sample_time", "steps", "plant", "loops"}) {
        EXPECT_TRUE(mentions(errs, key)) << key;
    }
}

TEST(ParseScenario, MinimalDocumentParses)
{
    const auto s = pcac::parse_scenario(kMinimal);
    EXPECT_EQ(s.loops[0].u_min, std::vector<double>{-1.0});
    EXPECT_EQ(s.loops[0].du_min, std::vector<double>{-0.2});
    EXPECT_EQ(s.substeps, 10);
}

TEST(ParseScenario, CommentsAllowed)
{
    EXPECT_NO_THROW(pcac::parse_scenario(std::string("// leading comment\n") + kMinimal));
}

TEST(ParseScenario, UnknownKeyRejected)
{
    const auto errs = parse_errors(with_replacement(kMinimal, "\"steps\": 3", "\"steps\": 3, \"stpes\": 4"));
    EXPECT_TRUE(mentions(errs, "stpes: unknown key"));
}

TEST(ParseScenario, InvariantViolationsCollected)
{
    auto text = with_replacement(kMinimal, "\"sample_time\": 0.05", "\"sample_time\": 0");
    text = with_replacement(text, "\"steps\": 3", "\"steps\": 0");
    const auto errs = parse_errors(text);
    EXPECT_TRUE(mentions(errs, "sample_time"));
    EXPECT_TRUE(mentions(errs, "steps"));
}

TEST(ParseScenario, TrajectoryGapRejected)
{
    const auto errs = parse_errors(with_replacement(kMinimal, "[[0, 0], [0.1, 1]]", "[[2, 0], [3, 1]]"));
    EXPECT_TRUE(mentions(errs, "t = 0"));
}

TEST(ParseScenario, UnknownPlantOutputRejected)
{
    const auto errs = parse_errors(with_replacement(kMinimal, "\"outputs\": [\"y\"], \"inputs\": [\"u\"], \"tracked\"",
                                                    "\"outputs\": [\"z\"], \"inputs\": [\"u\"], \"tracked\""));
    EXPECT_TRUE(mentions(errs, "unknown plant output"));
}

TEST(ParseScenario, WrongChannelCountRejected)
{
    const auto errs = parse_errors(with_replacement(kMinimal, "\"u_max\": 1", "\"u_max\": [1, 2]"));
    EXPECT_TRUE(mentions(errs, "u_max: expected 1 entries"));
}

TEST(ParseScenario, SyntaxErrorReported)
{
    EXPECT_TRUE(mentions(parse_errors("{\"name\": }"), "syntax"));
}

TEST(PrintScenario, ParsePrintStable)
{
    for (const char* name : kFixtures) {
        const auto s = fixture(name);
        const auto text = pcac::print_scenario(s);
        EXPECT_EQ(pcac::parse_scenario(text), s) << name;
        EXPECT_EQ(pcac::print_scenario(pcac::parse_scenario(text)), text) << name;
    }
}

TEST(TraceCsv, SingleStepHasTwoLines)
{
    auto s = pcac::parse_scenario(kMinimal);
    s.steps = 1;
    const auto csv = pcac::trace_csv(pcac::run_scenario(s));
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(TraceCsv, ColumnCountMatchesSchema)
{
    for (const char* name : kFixtures) {
        auto s = fixture(name);
        s.steps = 5;
        const auto trace = pcac::run_scenario(s);
        const auto table = pcac::trace_table(trace);
        std::size_t pt = 0;
        std::size_t p = 0;
        std::size_t m = 0;
        for (const auto& l : s.loops) {
            pt += l.tracked.size();
            p += l.outputs.size();
            m += l.inputs.size();
        }
        EXPECT_EQ(table.header.size(), 2 + (2 * pt + p + 2 * m + 3 * s.loops.size())) << name;
        EXPECT_EQ(table.rows.size(), 5u);
    }
}

TEST(TraceCsv, RoundTripExact)
{
    auto s = fixture("linear_alt_bank");
    s.steps = 200;
    const auto trace = pcac::run_scenario(s);
    const auto table = pcac::trace_table(trace);
    const auto h = *table.column("y_h");
    const auto u = *table.column("u_de");
    const auto b = *table.column("qp_cost_long");
    for (std::size_t k = 0; k < trace.steps.size(); ++k) {
        ASSERT_EQ(table.at(k, h), trace.steps[k].y(0));
        ASSERT_EQ(table.at(k, u), trace.steps[k].loops[0].u(0));
        ASSERT_EQ(table.at(k, b), trace.steps[k].loops[0].qp_cost);
    }
}

TEST(TraceCsv, NumbersRoundTripForAwkwardValues)
{
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 123456789.123456789}) {
        const auto text = pcac::format_double(v);
        double back = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), back);
        EXPECT_EQ(back, v) << text;
    }
}

TEST(TraceCsv, Deterministic)
{
    auto s = fixture("nonlinear_alt_speed");
    s.steps = 300;
    EXPECT_EQ(pcac::trace_csv(pcac::run_scenario(s)), pcac::trace_csv(pcac::run_scenario(s)));
}

TEST(TraceCsv, ReaderRejectsRaggedRows)
{
    std::istringstream in("k,t,x\n0,0,1\n1,0.05\n");
    EXPECT_THROW(pcac::read_trace_csv(in), pcac::ConfigError);
}

namespace {

pcac::TraceTable synthetic(const std::vector<double>& y, const std::vector<double>& r)
{
    pcac::TraceTable t;
    t.header = {"k", "t", "r_a_0", "yt_a_0", "u_x", "beta_a"};
    for (std::size_t k = 0; k < y.size(); ++k) {
        t.rows.push_back({double(k), 0.05 * double(k), r[k], y[k], 0.0, 1.0});
    }
    return t;
}

} // namespace

TEST(Metrics, PerfectTrackingHasZeroCost)
{
    const auto m = pcac::compute_metrics(synthetic({1, 2, 3}, {1, 2, 3}));
    EXPECT_EQ(m.cumulative_cost, 0.0);
    EXPECT_EQ(m.loops[0].rms_error, 0.0);
    EXPECT_EQ(m.loops[0].transient_duration, 0.0);
}

TEST(Metrics, ConstantOffset)
{
    const std::vector<double> y(40, 0.75);
    const std::vector<double> r(40, 1.0);
    const auto m = pcac::compute_metrics(synthetic(y, r));
    EXPECT_NEAR(m.cumulative_cost, 40 * 0.25, 1e-12);
    EXPECT_NEAR(m.loops[0].rms_error, 0.25, 1e-12);
    EXPECT_NEAR(m.loops[0].transient_duration, m.duration, 1e-12); // never settles at 5%
}

TEST(Metrics, ConstraintMarginNonnegative)
{
    auto s = fixture("linear_alt_bank");
    s.steps = 400;
    const auto m = pcac::compute_metrics(pcac::run_scenario(s));
    ASSERT_TRUE(m.constraint_margin.has_value());
    EXPECT_GE(*m.constraint_margin, 0.0);
    for (const auto& l : m.loops) {
        EXPECT_GE(l.cumulative_cost, 0.0);
        EXPECT_GE(l.rms_error, 0.0);
        EXPECT_GE(l.transient_duration, 0.0);
    }
}

TEST(Metrics, EmptyTraceRejected)
{
    pcac::TraceTable t;
    t.header = {"k", "t"};
    EXPECT_THROW(pcac::compute_metrics(t), pcac::ConfigError);
}
