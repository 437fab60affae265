#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include "ucodec/bench.hpp"
#include "ucodec/error.hpp"
#include "ucodec/rng.hpp"

using namespace ucodec;

namespace {

// Counts the multiplies of a direct 1-d convolution loop nest.
std::int64_t counted_conv_macs(int c_in, int c_out, int kernel, int l_out) {
    std::int64_t count = 0;
    for (int o = 0; o < c_out; ++o) {
        for (int t = 0; t < l_out; ++t) {
            for (int i = 0; i < c_in; ++i) {
                for (int k = 0; k < kernel; ++k) {
                    ++count;
                }
            }
        }
    }
    return count;
}

std::vector<double> sine(int n, double freq) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        x[i] = std::sin(2.0 * std::numbers::pi * freq * i / 16000.0);
    }
    return x;
}

}  // namespace

TEST(Macs, LinearAndConvDefinitions) {
    EXPECT_EQ(mac_linear(4, 3, 2), 24);
    EXPECT_EQ(mac_conv1d(1, 1, 3, 10), 30);
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const int ci = 1 + static_cast<int>(rng() % 6);
        const int co = 1 + static_cast<int>(rng() % 6);
        const int k = 1 + static_cast<int>(rng() % 9);
        const int l = 1 + static_cast<int>(rng() % 40);
        EXPECT_EQ(mac_conv1d(ci, co, k, l), counted_conv_macs(ci, co, k, l));
    }
    EXPECT_THROW(mac_linear(0, 3, 2), Error);
}

TEST(Macs, TransformerClosedForm) {
    EXPECT_DOUBLE_EQ(mac_transformer(1, 2, 4, 1), 36.0);
    for (int seq : {1, 7, 64, 500}) {
        EXPECT_GT(mac_transformer(2, 64, 256, 2 * seq), 2.0 * mac_transformer(2, 64, 256, seq));
    }
}

TEST(Macs, TransformerIsMonotone) {
    const double base = mac_transformer(3, 32, 128, 20);
    EXPECT_GT(mac_transformer(4, 32, 128, 20), base);
    EXPECT_GT(mac_transformer(3, 33, 128, 20), base);
    EXPECT_GT(mac_transformer(3, 32, 129, 20), base);
    EXPECT_GT(mac_transformer(3, 32, 128, 21), base);
    const double step = mac_transformer_step(3, 32, 128, 20);
    EXPECT_GT(mac_transformer_step(3, 32, 128, 21), step);
    EXPECT_GT(mac_transformer_step(4, 32, 128, 20), step);
}

TEST(Macs, PaperScaleGlobalStepNearPublishedFigure) {
    const double g = mac_transformer_step(24, 1536, 6144, 250) * 1e-9;
    EXPECT_DOUBLE_EQ(g, 697909248.0 * 1e-9);
    EXPECT_GT(g, 0.906 / 2.0);
    EXPECT_LT(g, 0.906 * 2.0);
}

TEST(Macs, PublishedTotalsFollowFromPerFrameFigures) {
    const auto table = published_mac_table();
    ASSERT_EQ(table.size(), 6u);
    for (const auto& r : table) {
        EXPECT_NEAR(r.row.mac_total(), r.published_total, 0.05) << r.row.model;
    }
    EXPECT_NEAR(mac_total_per_second(50, 0.906, 0.006), 45.6, 1e-9);
    EXPECT_NEAR(mac_total_per_second(5, 0.163, 0.014), 0.885, 1e-12);
    EXPECT_NEAR(mac_total_per_second(12.5, 0.578, 0.014), 7.4, 1e-12);
    EXPECT_NEAR(mac_total_per_second(5, 0.189, 0.203), 1.96, 1e-12);
}

TEST(Macs, AnalyticLocalCostGrowsWithDepth) {
    const auto shallow = analytic_macs("a", 5, 8, 2, 128, 512, 2, 128, 512, 25);
    const auto deep = analytic_macs("b", 5, 32, 2, 128, 512, 2, 128, 512, 25);
    EXPECT_DOUBLE_EQ(shallow.mac_g, deep.mac_g);
    EXPECT_GT(deep.mac_l, 4.0 * shallow.mac_l);
}

TEST(Macs, CsvLayout) {
    MacBreakdown r{"x", 5.0, 0.189, 0.203};
    const std::string csv = mac_csv({r});
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "model,frame_rate,rtf,mac_g,mac_l,mac_total");
    EXPECT_NE(csv.find("x,5,,0.189,0.203,1.96"), std::string::npos) << csv;
}

TEST(Rtf, SleepWorkload) {
    const auto rep = measure_rtf([] {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        return 0.2;
    });
    EXPECT_EQ(rep.runs, 3);
    EXPECT_NEAR(rep.rtf, 0.5, 0.05);
    EXPECT_THROW(measure_rtf([] { return 0.0; }), Error);
}

TEST(Rtf, RepeatedMeasurementIsStable) {
    auto work = [] {
        volatile double acc = 0.0;
        for (int i = 0; i < 3000000; ++i) {
            acc = acc + std::sqrt(static_cast<double>(i));
        }
        return 1.0;
    };
    const double a = measure_rtf(work, 5).rtf;
    const double b = measure_rtf(work, 5).rtf;
    EXPECT_LT(std::abs(a - b) / std::min(a, b), 0.2);
}

TEST(Metrics, SiSnrIdentityAndScale) {
    const auto x = sine(1600, 440);
    EXPECT_EQ(si_snr(x, x), 100.0);
    std::vector<double> twice(x);
    for (double& v : twice) {
        v *= 2.0;
    }
    EXPECT_EQ(si_snr(x, twice), si_snr(x, x));
    Rng rng(2);
    auto noisy = x;
    const auto noise = normal_values(rng, x.size(), 0.1);
    for (std::size_t i = 0; i < x.size(); ++i) {
        noisy[i] += noise[i];
    }
    std::vector<double> scaled(noisy);
    for (double& v : scaled) {
        v *= 3.5;
    }
    EXPECT_NEAR(si_snr(x, noisy), si_snr(x, scaled), 1e-9);
}

TEST(Metrics, SiSnrOrthogonalIsNonPositive) {
    // sin and cos over whole periods are orthogonal and zero-mean.
    std::vector<double> s(1600);
    std::vector<double> c(1600);
    for (int i = 0; i < 1600; ++i) {
        s[i] = std::sin(2.0 * std::numbers::pi * 10.0 * i / 1600.0);
        c[i] = std::cos(2.0 * std::numbers::pi * 10.0 * i / 1600.0);
    }
    EXPECT_LE(si_snr(s, c), 0.0);
    // Mixture with a known target/noise energy ratio of 1/4.
    std::vector<double> mix(1600);
    for (int i = 0; i < 1600; ++i) {
        mix[i] = s[i] + 2.0 * c[i];
    }
    EXPECT_NEAR(si_snr(s, mix), 10.0 * std::log10(0.25), 1e-9);
}

TEST(Metrics, SiSnrErrors) {
    const std::vector<double> silent(100, 0.25);
    const std::vector<double> other(100, 1.0);
    try {
        si_snr(silent, other);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UndefinedMetric);
    }
    EXPECT_THROW(si_snr(std::vector<double>(4, 0.0), std::vector<double>(5, 0.0)), Error);
}

TEST(Metrics, MelL1) {
    const auto x = sine(4000, 300);
    EXPECT_EQ(mel_l1(x, x), 0.0);
    EXPECT_GT(mel_l1(x, sine(4000, 900)), 0.1);
}
