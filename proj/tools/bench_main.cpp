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

// sensemesh-bench: benchmark driver. Spawns client nodes as child processes
// (binaries of sensemesh-node), hosts the aggregator in-process, drives
// request streams against them in one of three delivery modes, and writes
// events.csv / samples.csv / shares.csv / summary.txt into the output
// directory. Subcommands cover the single-run, paired-mode, storage-growth
// and offline-autonomy experiments plus offline recomputation of a report
// from its event log.

#include "sensemesh/harness/experiments.hpp"
#include "sensemesh/harness/metrics.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <unistd.h>
#include <vector>

namespace {

using namespace sensemesh;

/// Default to the sensemesh-node binary sitting next to this executable.
std::string sibling_node_binary() {
    std::error_code ec;
    auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
    if (ec) return "sensemesh-node";
    return (self.parent_path() / "sensemesh-node").string();
}

void print_metrics(const harness::Metrics& m) {
    std::cout << "mode=" << m.mode << "\n"
              << "streams=" << m.streams << "\n"
              << "duration_ms=" << m.duration_ms << "\n"
              << "completions=" << m.completions << "\n"
              << "errors=" << m.errors << "\n"
              << "points=" << m.points << "\n"
              << "points_per_minute=" << harness::format_double(m.points_per_minute) << "\n"
              << "avg_time_per_request_ms=" << harness::format_double(m.avg_time_per_request_ms)
              << "\n"
              << "share_mean_pct=" << harness::format_double(m.share_mean_pct) << "\n"
              << "share_cv=" << harness::format_double(m.share_cv) << "\n";
}

int fail(const core::Error& e) {
    std::cerr << e.code << ": " << e.message << "\n";
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sensemesh benchmark harness"};
    app.require_subcommand(1);

    harness::RunSpec spec;
    spec.node_binary = sibling_node_binary();
    spec.out_dir = "bench-out";

    auto add_run_options = [&](CLI::App* cmd) {
        cmd->add_option("--mode", spec.mode, "pull | persistent_stream | push")
            ->capture_default_str();
        cmd->add_option("--clients", spec.clients, "client node processes")->capture_default_str();
        cmd->add_option("--streams-per-client", spec.streams_per_client,
                        "request streams aimed at each client")
            ->capture_default_str();
        cmd->add_option("--duration-ms", spec.duration_ms, "measured window length")
            ->capture_default_str();
        cmd->add_option("--request-interval-ms", spec.request_interval_ms,
                        "pull-mode request period per stream")
            ->capture_default_str();
        cmd->add_option("--sampling-interval-ms", spec.sampling_interval_ms,
                        "sensor sampling period on the clients")
            ->capture_default_str();
        cmd->add_option("--history", spec.history_size, "per-sensor window capacity")
            ->capture_default_str();
        cmd->add_option("--tick-limit", spec.tick_limit,
                        "stop sampling after this many ticks per sensor (0 = never)")
            ->capture_default_str();
        cmd->add_option("--seed", spec.seed, "fixture seed")->capture_default_str();
        cmd->add_option("--ingest-limit", spec.ingest_limit_per_s,
                        "aggregator ingest budget, points/s (0 = unconstrained)")
            ->capture_default_str();
        cmd->add_option("--out", spec.out_dir, "output directory")->capture_default_str();
        cmd->add_option("--node-bin", spec.node_binary, "sensemesh-node binary")
            ->capture_default_str();
        cmd->add_option("--run-id", spec.run_id, "label used in summary.txt")
            ->capture_default_str();
    };

    auto* run = app.add_subcommand("run", "one benchmark run in a single delivery mode");
    add_run_options(run);

    auto* compare = app.add_subcommand(
        "compare-modes", "paired persistent_stream/push runs over consecutive seeds");
    int pairs = 3;
    add_run_options(compare);
    compare->add_option("--pairs", pairs, "number of seed pairs")->capture_default_str();

    auto* storage = app.add_subcommand("storage", "sliding-window growth series");
    harness::StorageSpec storage_spec;
    storage_spec.out_dir = "bench-out";
    storage->add_option("--capacity", storage_spec.capacity, "window capacity (elements)")
        ->capture_default_str();
    storage->add_option("--inserts", storage_spec.inserts, "elements to insert")
        ->capture_default_str();
    storage->add_option("--step-ms", storage_spec.step_ms, "virtual time step per insert")
        ->capture_default_str();
    storage->add_option("--seed", storage_spec.seed, "value generator seed")
        ->capture_default_str();
    storage->add_option("--out", storage_spec.out_dir, "output directory")
        ->capture_default_str();

    auto* autonomy =
        app.add_subcommand("autonomy", "offline-autonomy run: outage, catch-up, twin comparison");
    harness::AutonomySpec autonomy_spec;
    autonomy_spec.out_dir = "bench-out";
    autonomy_spec.node_binary = spec.node_binary;
    autonomy->add_option("--out", autonomy_spec.out_dir, "output directory")
        ->capture_default_str();
    autonomy->add_option("--node-bin", autonomy_spec.node_binary, "sensemesh-node binary")
        ->capture_default_str();
    autonomy->add_option("--seed", autonomy_spec.seed, "fixture seed")->capture_default_str();
    autonomy->add_option("--sampling-interval-ms", autonomy_spec.sampling_interval_ms,
                         "sensor sampling period")
        ->capture_default_str();
    autonomy->add_option("--history", autonomy_spec.history_size, "per-sensor window capacity")
        ->capture_default_str();
    autonomy
        ->add_option("--tick-limit", autonomy_spec.tick_limit, "samples per sensor before stopping")
        ->capture_default_str();
    autonomy->add_option("--connected-ms", autonomy_spec.connected_ms, "streaming time before the outage")
        ->capture_default_str();
    autonomy->add_option("--outage-ms", autonomy_spec.outage_ms, "aggregator downtime")
        ->capture_default_str();

    auto* recompute =
        app.add_subcommand("recompute", "recompute run metrics from a persisted event log");
    std::string events_path;
    recompute->add_option("events", events_path, "path to events.csv")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        auto summary = harness::run_experiment(spec);
        if (!summary) return fail(summary.error());
        print_metrics(summary.value().metrics);
        std::cout << "mean_rtt_ms=" << harness::format_double(summary.value().mean_rtt_ms) << "\n"
                  << "report=" << summary.value().paths.summary_txt << "\n";
        return 0;
    }

    if (compare->parsed()) {
        bool all_ordered = true;
        for (int p = 0; p < pairs; ++p) {
            harness::RunSpec a = spec;
            a.seed = spec.seed + static_cast<std::uint64_t>(p);
            a.mode = "persistent_stream";
            a.run_id = "persistent_seed" + std::to_string(a.seed);
            a.out_dir = spec.out_dir + "/" + a.run_id;
            harness::RunSpec b = a;
            b.mode = "push";
            b.run_id = "push_seed" + std::to_string(b.seed);
            b.out_dir = spec.out_dir + "/" + b.run_id;

            auto ra = harness::run_experiment(a);
            if (!ra) return fail(ra.error());
            auto rb = harness::run_experiment(b);
            if (!rb) return fail(rb.error());
            const double cv_stream = ra.value().metrics.share_cv;
            const double cv_push = rb.value().metrics.share_cv;
            all_ordered = all_ordered && cv_stream < cv_push;
            std::cout << "seed=" << a.seed
                      << " cv_persistent=" << harness::format_double(cv_stream)
                      << " cv_push=" << harness::format_double(cv_push)
                      << " rtt_persistent_ms=" << harness::format_double(ra.value().mean_rtt_ms)
                      << " rtt_push_ms=" << harness::format_double(rb.value().mean_rtt_ms) << "\n";
        }
        std::cout << "persistent_fairer_in_every_pair=" << (all_ordered ? "true" : "false")
                  << "\n";
        return all_ordered ? 0 : 1;
    }

    if (storage->parsed()) {
        auto report = harness::storage_experiment(storage_spec);
        if (!report) return fail(report.error());
        const auto& rows = report.value().rows;
        std::cout << "inserts=" << rows.size() << "\n"
                  << "capacity=" << report.value().capacity << "\n"
                  << "final_count=" << (rows.empty() ? 0 : rows.back().count) << "\n"
                  << "final_bytes=" << (rows.empty() ? 0 : rows.back().bytes) << "\n"
                  << "max_element_bytes=" << report.value().max_element_bytes << "\n"
                  << "series=" << report.value().storage_csv << "\n";
        return 0;
    }

    if (autonomy->parsed()) {
        auto report = harness::autonomy_experiment(autonomy_spec);
        if (!report) return fail(report.error());
        const auto& r = report.value();
        std::cout << "local_queries_during_outage=" << (r.local_queries_during_outage ? "ok" : "FAILED")
                  << "\n"
                  << "stored_before_outage=" << r.stored_before_outage << "\n"
                  << "stored_after_outage=" << r.stored_after_outage << "\n"
                  << "delivered_elements=" << r.received_seqs.size() << "\n"
                  << "seqs_contiguous=" << (r.seqs_contiguous ? "true" : "false") << "\n"
                  << "gap_frames=" << r.gap_frames << "\n"
                  << "windows_compared=" << r.windows_compared << "\n"
                  << "windows_equal=" << (r.windows_equal ? "true" : "false") << "\n";
        if (!r.detail.empty()) std::cout << "detail=" << r.detail << "\n";
        const bool ok = r.local_queries_during_outage && r.seqs_contiguous && r.gap_frames == 0 &&
                        r.windows_equal;
        return ok ? 0 : 1;
    }

    if (recompute->parsed()) {
        auto metrics = harness::recompute_metrics(events_path);
        if (!metrics) return fail(metrics.error());
        print_metrics(metrics.value());
        return 0;
    }
    return 0;
}
