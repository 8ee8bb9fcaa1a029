/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sensemesh/harness/event_log.hpp"
#include "sensemesh/harness/experiments.hpp"
#include "sensemesh/harness/fixture.hpp"
#include "sensemesh/harness/metrics.hpp"
#include "sensemesh/harness/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace sensemesh;
using harness::EventRow;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::path("harness_test_tmp") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

/// A small but representative log: three streams, one of them starved.
std::vector<EventRow> synthetic_rows() {
    std::vector<EventRow> rows;
    rows.push_back({"run_start", "", -1, "", 1000, "pull", 3});
    rows.push_back({"request", "0#0", 0, "temp", 2000, "ok", 1});
    rows.push_back({"request", "1#0", 1, "hum", 2500, "ok", 1});
    rows.push_back({"request", "0#1", 0, "temp", 3000, "ok", 1});
    rows.push_back({"request", "1#1", 1, "hum", 3500, "TIMEOUT", 0});
    rows.push_back({"request", "0#2", 0, "temp", 4000, "ok", 1});
    rows.push_back({"request", "1#2", 1, "hum", 4500, "ok", 1});
    rows.push_back({"request", "0#3", 0, "temp", 5000, "ok", 1});
    rows.push_back({"run_end", "", -1, "", 61000, "", 0});
    return rows;
}

} // namespace

TEST_CASE("event rows survive a csv round trip") {
    const std::vector<EventRow> rows = {
        {"run_start", "", -1, "", 1755000000000, "push", 90},
        {"request", "12#4", 12, "mic", 1755000001234, "ok", 1},
        {"deliver", "3#77", 3, "accel", 1755000002000, "ok", 1},
        {"request", "5#9", 5, "co2", 1755000003000, "TIMEOUT", 0},
        {"run_end", "", -1, "", 1755000300000, "", 0},
    };
    for (const auto& row : rows) {
        auto back = harness::event_from_csv(harness::to_csv(row));
        REQUIRE(back.ok());
        CHECK(back.value() == row);
    }
}

TEST_CASE("csv round trip holds across randomized rows") {
    std::mt19937_64 rng(0x5eed0011ULL);
    const std::vector<std::string> kinds = {"request", "deliver", "run_start", "run_end"};
    const std::vector<std::string> statuses = {"ok", "TIMEOUT", "QUEUE_FULL", "THROTTLED", ""};
    auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
    for (int i = 0; i < 1000; ++i) {
        EventRow row;
        row.kind = pick(kinds);
        row.request_id =
            rng() % 4 == 0 ? "" : std::to_string(rng() % 100) + "#" + std::to_string(rng() % 1000);
        row.stream = static_cast<std::int64_t>(rng() % 2001) - 1000;
        row.sensor = rng() % 5 == 0 ? "" : harness::stream_target(static_cast<int>(rng() % 13));
        row.t_ms = static_cast<std::int64_t>(rng() % 2000000000000ULL);
        row.status = pick(statuses);
        row.points = static_cast<std::int64_t>(rng() % 1000);
        auto back = harness::event_from_csv(harness::to_csv(row));
        REQUIRE(back.ok());
        REQUIRE(back.value() == row);
    }
}

TEST_CASE("malformed csv lines are rejected with a code") {
    for (const std::string line : {
             "request,0#0,0,temp,1000,ok",          // six fields
             "request,0#0,0,temp,1000,ok,1,extra",  // eight fields
             "request,0#0,zero,temp,1000,ok,1",     // stream not an integer
             "request,0#0,0,temp,1000,ok,one",      // points not an integer
             "request,0#0,0,temp,10.5,ok,1",        // t_ms not an integer
             "",                                    // empty line
         }) {
        auto row = harness::event_from_csv(line);
        REQUIRE_FALSE(row.ok());
        CHECK(row.error().code == harness::code::kBadEventLog);
    }
}

TEST_CASE("metrics from a synthetic log match hand computation") {
    auto m = harness::compute_metrics(synthetic_rows());
    REQUIRE(m.ok());
    const auto& metrics = m.value();
    CHECK(metrics.mode == "pull");
    CHECK(metrics.streams == 3);
    CHECK(metrics.duration_ms == 60000);
    CHECK(metrics.completions == 6);
    CHECK(metrics.errors == 1);
    CHECK(metrics.points == 6);
    CHECK(metrics.avg_time_per_request_ms == doctest::Approx(10000.0).epsilon(1e-12));
    CHECK(metrics.points_per_minute == doctest::Approx(6.0).epsilon(1e-12));

    REQUIRE(metrics.per_stream.size() == 3); // the starved stream still counts
    CHECK(metrics.per_stream[0].completions == 4);
    CHECK(metrics.per_stream[0].points == 4);
    CHECK(metrics.per_stream[0].avg_ms == doctest::Approx(15000.0).epsilon(1e-12));
    CHECK(metrics.per_stream[0].share_pct == doctest::Approx(100.0 * 4 / 6).epsilon(1e-12));
    CHECK(metrics.per_stream[1].completions == 2);
    CHECK(metrics.per_stream[1].errors == 1);
    CHECK(metrics.per_stream[1].share_pct == doctest::Approx(100.0 * 2 / 6).epsilon(1e-12));
    CHECK(metrics.per_stream[2].completions == 0);
    CHECK(metrics.per_stream[2].share_pct == 0.0);

    // Shares are proportional to {2, 1, 0}; the population CV of that set is
    // sqrt(2/3), independent of scaling.
    CHECK(metrics.share_mean_pct == doctest::Approx(100.0 / 3).epsilon(1e-12));
    CHECK(metrics.share_cv == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("metrics computation requires markers and completions") {
    std::vector<EventRow> no_markers = {{"request", "0#0", 0, "temp", 1000, "ok", 1}};
    auto a = harness::compute_metrics(no_markers);
    REQUIRE_FALSE(a.ok());
    CHECK(a.error().code == harness::code::kBadEventLog);

    std::vector<EventRow> no_completions = {
        {"run_start", "", -1, "", 1000, "pull", 2},
        {"request", "0#0", 0, "temp", 2000, "TIMEOUT", 0},
        {"run_end", "", -1, "", 3000, "", 0},
    };
    auto b = harness::compute_metrics(no_completions);
    REQUIRE_FALSE(b.ok());
    CHECK(b.error().code == harness::code::kNoCompletions);

    std::vector<EventRow> inverted = {
        {"run_start", "", -1, "", 5000, "pull", 1},
        {"run_end", "", -1, "", 5000, "", 0},
    };
    auto c = harness::compute_metrics(inverted);
    REQUIRE_FALSE(c.ok());
    CHECK(c.error().code == harness::code::kBadEventLog);
}

TEST_CASE("a written event log recomputes to identical metrics") {
    const auto dir = fresh_dir("recompute");
    const std::string path = (dir / "events.csv").string();

    harness::EventLog log;
    REQUIRE(log.open(path).ok());
    for (const auto& row : synthetic_rows()) log.append(row);
    log.close();

    // Appends after close must not change what the file holds.
    log.append({"request", "9#9", 9, "late", 99000, "ok", 1});

    auto direct = harness::compute_metrics(log.rows());
    auto reread = harness::recompute_metrics(path);
    REQUIRE(direct.ok());
    REQUIRE(reread.ok());

    const auto& a = direct.value();
    const auto& b = reread.value();
    CHECK(a.mode == b.mode);
    CHECK(a.streams == b.streams);
    CHECK(a.duration_ms == b.duration_ms);
    CHECK(a.completions == b.completions);
    CHECK(a.errors == b.errors);
    CHECK(a.points == b.points);
    // Same integers through the same arithmetic: bit-for-bit equality.
    CHECK(a.avg_time_per_request_ms == b.avg_time_per_request_ms);
    CHECK(a.points_per_minute == b.points_per_minute);
    CHECK(a.share_mean_pct == b.share_mean_pct);
    CHECK(a.share_cv == b.share_cv);
    REQUIRE(a.per_stream.size() == b.per_stream.size());
    for (size_t i = 0; i < a.per_stream.size(); ++i) {
        CHECK(a.per_stream[i].completions == b.per_stream[i].completions);
        CHECK(a.per_stream[i].points == b.per_stream[i].points);
        CHECK(a.per_stream[i].avg_ms == b.per_stream[i].avg_ms);
        CHECK(a.per_stream[i].share_pct == b.per_stream[i].share_pct);
    }
}

TEST_CASE("report emission is deterministic byte for byte") {
    auto m = harness::compute_metrics(synthetic_rows());
    REQUIRE(m.ok());
    const harness::SummaryExtras extras = {{"mean_rtt_ms", harness::format_double(4.25)},
                                           {"rtt_samples", "6"}};

    const auto dir_a = fresh_dir("report_a");
    const auto dir_b = fresh_dir("report_b");
    auto pa = harness::emit_report(dir_a.string(), "demo", m.value(), extras);
    auto pb = harness::emit_report(dir_b.string(), "demo", m.value(), extras);
    REQUIRE(pa.ok());
    REQUIRE(pb.ok());

    CHECK(slurp(pa.value().samples_csv) == slurp(pb.value().samples_csv));
    CHECK(slurp(pa.value().shares_csv) == slurp(pb.value().shares_csv));
    CHECK(slurp(pa.value().summary_txt) == slurp(pb.value().summary_txt));

    const std::string samples = slurp(pa.value().samples_csv);
    CHECK(samples.rfind("stream,sensor,completions,errors,points,avg_ms\n", 0) == 0);
    const std::string shares = slurp(pa.value().shares_csv);
    CHECK(shares.rfind("stream,sensor,points,share_pct\n", 0) == 0);

    // summary.txt keys come in a fixed order so runs diff cleanly.
    std::istringstream summary(slurp(pa.value().summary_txt));
    std::string line;
    for (const char* prefix :
         {"run_id=", "mode=", "streams=", "duration_ms=", "completions=", "errors=", "points=",
          "points_per_minute=", "avg_time_per_request_ms=", "share_mean_pct=", "share_cv=",
          "mean_rtt_ms=", "rtt_samples="}) {
        REQUIRE(std::getline(summary, line));
        CHECK(line.rfind(prefix, 0) == 0);
    }
    CHECK_FALSE(std::getline(summary, line));
}

TEST_CASE("storage experiment fills the window and then plateaus") {
    harness::StorageSpec spec;
    spec.capacity = 64;
    spec.inserts = 200;
    spec.seed = 7;
    auto report = harness::storage_experiment(spec);
    REQUIRE(report.ok());
    const auto& r = report.value();
    REQUIRE(r.rows.size() == 200);
    CHECK(r.max_element_bytes > 0);
    for (std::int64_t k = 0; k < 200; ++k) {
        CHECK(r.rows[static_cast<size_t>(k)].inserted == k + 1);
        CHECK(r.rows[static_cast<size_t>(k)].count == std::min<std::int64_t>(k + 1, 64));
        CHECK(r.rows[static_cast<size_t>(k)].bytes > 0);
    }
    // Once saturated, memory stays pinned near the plateau: the spread of the
    // byte estimate never exceeds one element.
    std::int64_t lo = r.rows[64].bytes;
    std::int64_t hi = r.rows[64].bytes;
    for (size_t k = 64; k < 200; ++k) {
        lo = std::min(lo, r.rows[k].bytes);
        hi = std::max(hi, r.rows[k].bytes);
    }
    CHECK(hi - lo < r.max_element_bytes);
}

TEST_CASE("storage experiment output is reproducible") {
    harness::StorageSpec spec;
    spec.capacity = 32;
    spec.inserts = 100;
    spec.seed = 99;

    auto a = harness::storage_experiment(spec);
    spec.out_dir = fresh_dir("storage_a").string();
    auto b = harness::storage_experiment(spec);
    REQUIRE(a.ok());
    REQUIRE(b.ok());
    REQUIRE(a.value().rows.size() == b.value().rows.size());
    for (size_t i = 0; i < a.value().rows.size(); ++i) {
        CHECK(a.value().rows[i].inserted == b.value().rows[i].inserted);
        CHECK(a.value().rows[i].count == b.value().rows[i].count);
        CHECK(a.value().rows[i].bytes == b.value().rows[i].bytes);
    }

    const std::string csv = slurp(b.value().storage_csv);
    CHECK(csv.rfind("inserted,count,bytes\n", 0) == 0);
    spec.out_dir = fresh_dir("storage_b").string();
    auto c = harness::storage_experiment(spec);
    REQUIRE(c.ok());
    CHECK(slurp(c.value().storage_csv) == csv);
}

TEST_CASE("client fixtures are deterministic and distinct per client") {
    const auto a = harness::client_fixture(0, 42);
    const auto b = harness::client_fixture(0, 42);
    const auto other_client = harness::client_fixture(1, 42);
    const auto other_seed = harness::client_fixture(0, 43);

    REQUIRE(a.size() == static_cast<size_t>(harness::kClientSensorCount));
    CHECK(a == b);
    CHECK(a != other_client);
    CHECK(a != other_seed);

    const auto& names = harness::fixture_sensor_names();
    REQUIRE(names.size() == a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == names[i]);
        CHECK_FALSE(a[i].output_schema.empty());
        CHECK(a[i].history_size == 120);
        CHECK(a[i].sampling_interval_ms == 1000);
    }

    // Benchmark streams wrap around the fixture.
    CHECK(harness::stream_target(0) == names[0]);
    CHECK(harness::stream_target(13) == names[0]);
    CHECK(harness::stream_target(14) == names[1]);

    harness::FixtureOptions fast;
    fast.sampling_interval_ms = 40;
    fast.history_size = 16;
    fast.tick_limit = 25;
    for (const auto& s : harness::client_fixture(2, 7, fast)) {
        CHECK(s.sampling_interval_ms == 40);
        CHECK(s.history_size == 16);
        CHECK(s.tick_limit == 25);
    }
}

TEST_CASE("summary numbers are printed with nine fixed decimals") {
    CHECK(harness::format_double(1.5) == "1.500000000");
    CHECK(harness::format_double(0.0) == "0.000000000");
    CHECK(harness::format_double(-9.030899869919434) == "-9.030899870");
    CHECK(harness::format_double(100.0 / 3.0) == "33.333333333");
}
