#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>

#include "coipss/wams.hpp"

using namespace coipss;
using Catch::Approx;

TEST_CASE("constant angle reads nominal frequency") {
    FrequencySensor s;
    double f = 0.0;
    for (int k = 0; k < 100; ++k) f = s.push(0.7);
    CHECK(f == Approx(60.0).margin(1e-12));
}

TEST_CASE("sustained angle ramp converges to the offset frequency") {
    FrequencyFilterParams p;
    FrequencySensor s(p);
    const double slope = 2.0 * kPi * 0.5;  // +0.5 Hz
    double f = 0.0;
    for (int k = 0; k < 200; ++k) f = s.push(slope * k * p.sample_period);
    CHECK(f == Approx(60.5).epsilon(0.001));
}

TEST_CASE("warm-up reports nominal until two samples arrive") {
    FrequencySensor s;
    CHECK(s.push(123.0) == 60.0);
    CHECK_FALSE(s.warmed_up());
    s.push(123.0);
    CHECK(s.warmed_up());
}

TEST_CASE("angle wrap does not disturb the estimate") {
    FrequencyFilterParams p;
    FrequencySensor a(p), b(p);
    const double slope = 2.0 * kPi * 0.25;
    double fa = 0, fb = 0;
    for (int k = 0; k < 300; ++k) {
        const double th = slope * k * p.sample_period;
        fa = a.push(th);
        fb = b.push(std::remainder(th, 2.0 * kPi));  // wrapped input
    }
    CHECK(fa == Approx(fb).margin(1e-12));
}

TEST_CASE("sinusoidal angle amplitude matches the analytic cascade gain") {
    FrequencyFilterParams p;
    FrequencySensor s(p);
    const double f_sig = 0.5, amp = 0.01;
    double peak = 0.0;
    const int settle = 400, total = 700;
    for (int k = 0; k < total; ++k) {
        const double t = k * p.sample_period;
        const double f = s.push(amp * std::sin(2.0 * kPi * f_sig * t));
        if (k > settle) peak = std::max(peak, std::abs(f - 60.0));
    }
    const double expected = amp * FrequencySensor::cascade_gain(p, f_sig);
    CHECK(peak == Approx(expected).epsilon(0.02));
}

TEST_CASE("center-of-inertia speed over rotor speeds") {
    CHECK(coi_speed_exact({1.0042, 1.0042}, {3.0, 9.0}) == Approx(1.0042).epsilon(1e-14));
    CHECK(coi_speed_exact({1.002, 0.998}, {7.0, 7.0}) == Approx(1.0).epsilon(1e-14));
    CHECK(coi_speed_exact({1.01, 1.00}, {1.0, 9.0}) == Approx(1.001).epsilon(1e-12));
    CHECK_THROWS_AS(coi_speed_exact({}, {}), InputError);
    CHECK_THROWS_AS(coi_speed_exact({1.0}, {0.0}), InputError);
}

TEST_CASE("weighted frequency average") {
    CHECK(coi_speed_estimate({60.03, 59.97}, {0.5, 0.5}, 60.0) ==
          Approx(1.0).epsilon(1e-14));
    CHECK(coi_speed_estimate({60.3}, {1.0}, 60.0) == Approx(1.005).epsilon(1e-14));
    // default weights: arithmetic mean
    CHECK(coi_speed_estimate({60.0, 60.6, 59.4}, {}, 60.0) == Approx(1.0).epsilon(1e-12));
    // renormalization of a partial weight set
    CHECK(coi_speed_estimate({60.0, 61.0}, {0.2, 0.6}, 60.0) ==
          Approx((0.25 * 60.0 + 0.75 * 61.0) / 60.0).epsilon(1e-12));
}

TEST_CASE("estimator holds and flags when all sensors go stale") {
    CoiEstimator est({0.5, 0.5}, 60.0, 2.0);
    est.accept({0, 0.0, 60.06, 0});
    est.accept({1, 0.0, 60.06, 0});
    CHECK(est.update(0.1) == Approx(1.001).epsilon(1e-12));
    CHECK_FALSE(est.stale());
    // no traffic for more than the cutoff
    CHECK(est.update(2.5) == Approx(1.001).epsilon(1e-12));
    CHECK(est.stale());
}

TEST_CASE("stale sensors are excluded with weights renormalized") {
    CoiEstimator est({0.25, 0.75}, 60.0, 2.0);
    est.accept({0, 0.0, 59.4, 0});
    est.accept({1, 1.9, 60.6, 0});
    // at t=2.5 sensor 0 is stale (age 2.5), sensor 1 fresh (age 0.6)
    CHECK(est.update(2.5) == Approx(60.6 / 60.0).epsilon(1e-12));
    CHECK_FALSE(est.stale());
}

TEST_CASE("estimator state is invariant to delivery order") {
    std::vector<Datagram> batch;
    for (int k = 0; k < 20; ++k)
        batch.push_back({0, 0.03 * k, 60.0 + 0.01 * k, k});
    std::mt19937_64 rng(17);

    CoiEstimator ref({1.0}, 60.0);
    for (const auto& d : batch) ref.accept(d);
    const double expected = ref.update(1.0);

    for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(batch.begin(), batch.end(), rng);
        CoiEstimator est({1.0}, 60.0);
        for (const auto& d : batch) est.accept(d);
        CHECK(est.update(1.0) == expected);
    }
}

TEST_CASE("ideal channel forwards the stream unchanged") {
    SensorSpec spec;
    spec.sensor_id = 0;
    DatagramChannel ch(spec, 1234);
    std::vector<Datagram> sent;
    for (int k = 0; k < 50; ++k) sent.push_back({0, 0.03 * k, 60.0 + k, k});
    for (const auto& d : sent) ch.send(d);
    const auto got = ch.collect(10.0);
    REQUIRE(got.size() == sent.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
        CHECK(got[k].seq == sent[k].seq);
        CHECK(got[k].value_hz == sent[k].value_hz);
    }
    for (const auto& e : ch.audit()) CHECK(e.delivery_time == e.sample_time);
}

TEST_CASE("total loss delivers nothing") {
    SensorSpec spec;
    spec.drop_prob = 1.0;
    DatagramChannel ch(spec, 99);
    for (int k = 0; k < 20; ++k) ch.send({0, 0.03 * k, 60.0, k});
    CHECK(ch.collect(100.0).empty());
    for (const auto& e : ch.audit()) CHECK(e.dropped);
}

TEST_CASE("fixed transport delay is visible in the audit trail") {
    SensorSpec spec;
    spec.delay_mean = 0.1;
    spec.report_period = 0.03;
    DatagramChannel ch(spec, 7);
    for (int k = 0; k < 100; ++k) ch.send({0, 0.03 * k, 60.0, k});

    for (const auto& e : ch.audit())
        CHECK(e.delivery_time - e.sample_time == Approx(0.1).margin(1e-12));

    // age of the value a consumer holds between deliveries spans [0.1, 0.13)
    double last_sample = -1.0;
    std::vector<Datagram> held;
    for (double now = 0.2; now < 2.0; now += 0.001) {
        for (const auto& d : ch.collect(now)) last_sample = d.sample_time;
        if (last_sample >= 0.0) {
            const double age = now - last_sample;
            CHECK(age >= 0.1 - 1e-9);
            CHECK(age <= 0.13 + 1e-3);
        }
    }
}

TEST_CASE("seeded channels reproduce their delivery schedule bitwise") {
    SensorSpec spec;
    spec.delay_mean = 0.08;
    spec.jitter_std = 0.02;
    spec.drop_prob = 0.2;
    auto run = [&]() {
        DatagramChannel ch(spec, 20240601);
        for (int k = 0; k < 200; ++k) ch.send({0, 0.03 * k, 60.0 + k * 0.001, k});
        return ch.audit();
    };
    const auto a = run(), b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].dropped == b[k].dropped);
        CHECK(a[k].delivery_time == b[k].delivery_time);
    }
}

TEST_CASE("outage window suppresses traffic") {
    SensorSpec spec;
    spec.outage_start = 1.0;
    spec.outage_end = 2.0;
    DatagramChannel ch(spec, 3);
    for (int k = 0; k < 100; ++k) ch.send({0, 0.03 * k, 60.0, k});
    for (const auto& e : ch.audit()) {
        if (e.sample_time >= 1.0 && e.sample_time < 2.0)
            CHECK(e.dropped);
        else
            CHECK_FALSE(e.dropped);
    }
}

TEST_CASE("channel step sends and collects in one call") {
    SensorSpec spec;
    DatagramChannel ch(spec, 5);
    const auto got = channel_step(ch, 1.0, {{0, 0.5, 60.2, 0}, {0, 0.9, 60.3, 1}});
    REQUIRE(got.size() == 2);
    CHECK(got[1].value_hz == 60.3);
}
