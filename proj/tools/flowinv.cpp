// Copyright 2026 The flowinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// flowinv command line: generate, flows, sample, invert, compare.
// Exit status: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowinv/flowinv.hpp"

namespace {

using namespace flowinv;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct TableOptions {
  double tt = 300.0;
  double tw = 300.0;
  std::size_t nf = std::size_t{1} << 20;

  FlowTableConfig config() const { return {tt, tw, nf}; }
};

void add_table_options(CLI::App* cmd, TableOptions& t) {
  cmd->add_option("--tt", t.tt, "Flow expiry timeout in seconds")->capture_default_str();
  cmd->add_option("--tw", t.tw, "Flow buffer export timeout in seconds")->capture_default_str();
  cmd->add_option("--nf", t.nf, "Flow buffer size in records")->capture_default_str();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

FlowSet load_flows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  return read_flows_csv(in);
}

void write_flows(const std::string& path, const FlowSet& flows) {
  auto out = open_output(path);
  write_flows_csv(out, flows);
  if (!out) throw IoError("write failed for '" + path + "'");
}

void print_summary(const FlowSet& flows) {
  std::printf("packets_seen=%llu packets_sampled=%llu flows=%zu sampled_fraction=%.6f mean_flow_length=%.3f\n",
              static_cast<unsigned long long>(flows.packets_seen),
              static_cast<unsigned long long>(flows.packets_admitted), flows.records.size(),
              flows.sampled_fraction(), flows.mean_flow_length());
}

struct GenerateOptions {
  SyntheticTraceConfig cfg;
  std::uint32_t bytes_min = 1500;
  std::uint32_t bytes_max = 1500;
  std::string format = "text";
  std::string out;
  std::string truth;
};

int run_generate(GenerateOptions& o) {
  o.cfg.byte_len_model = ByteLengthModel{o.bytes_min, std::max(o.bytes_min, o.bytes_max)};
  const auto trace = generate_trace(o.cfg);
  auto out = open_output(o.out);
  if (o.format == "pcap") {
    write_pcap_trace(out, trace.packets);
  } else {
    write_text_trace(out, trace.packets);
  }
  if (!out) throw IoError("write failed for '" + o.out + "'");
  if (!o.truth.empty()) {
    auto t = open_output(o.truth);
    t << "length,count\n";
    for (const auto& [len, count] : trace.length_counts) t << len << ',' << count << '\n';
  }
  std::printf("flows=%llu packets=%zu max_intra_flow_gap=%.6f\n",
              static_cast<unsigned long long>(o.cfg.num_flows), trace.packets.size(),
              trace.max_intra_flow_gap);
  return 0;
}

int run_flows(const std::string& in, const TableOptions& table, const std::string& out) {
  const auto trace = read_trace(in);
  if (trace.skipped > 0) std::fprintf(stderr, "skipped %zu undecodable packets\n", trace.skipped);
  const auto flows = build_flows(trace.packets, table.config(), SamplerConfig{});
  write_flows(out, flows);
  print_summary(flows);
  return 0;
}

struct SampleOptions {
  std::string in;
  std::string method;
  std::optional<double> p;
  std::optional<double> target;
  std::uint64_t seed = 1;
  TableOptions table;
  std::string out;
};

int run_sample(const SampleOptions& o) {
  const auto method = parse_method(o.method);
  if (!method || *method == SamplerMethod::kAlways) throw ConfigError("unknown sampling method '" + o.method + "'");
  const auto trace = read_trace(o.in);
  if (trace.skipped > 0) std::fprintf(stderr, "skipped %zu undecodable packets\n", trace.skipped);
  double p = o.p.value_or(1.0);
  if (o.target) {
    const auto cal = calibrate_rate(trace.packets, *method, o.table.config(), *o.target, o.seed);
    p = cal.p;
    std::printf("calibrated p=%.10g (pilot fraction %.6f after %d runs)\n", cal.p, cal.achieved_fraction,
                cal.pilot_runs);
  }
  const auto flows = build_flows(trace.packets, o.table.config(), SamplerConfig{*method, p, o.seed});
  write_flows(o.out, flows);
  std::printf("method=%s p=%.10g ", std::string(method_name(*method)).c_str(), p);
  print_summary(flows);
  return 0;
}

struct InvertOptions {
  std::string in;
  std::string method;
  double p = 1.0;
  std::optional<double> mean_bytes;
  double bins_per_decade = kDefaultBinsPerDecade;
  std::string out;
};

int run_invert(const InvertOptions& o) {
  const auto flows = load_flows(o.in);
  const auto hist = flow_length_histogram(flows);
  nlohmann::json j;
  std::vector<double> observed;
  if (o.method == "syn") {
    const auto est = syn_estimate(flows);
    InversionResult r;
    r.p = o.p;
    r.raw_estimates = est.distribution.probs;
    r.clamped_normalized = est.distribution;
    j = to_json(r);
    j["tcp_only"] = true;
    if (est.warning) {
      j["warning"] = *est.warning;
      std::fprintf(stderr, "warning: %s\n", est.warning->c_str());
    }
    observed = distribution_from_histogram(tcp_flow_length_histogram(flows)).probs;
  } else if (o.method == "sh-packet" || o.method == "sh-byte") {
    if (hist.empty()) throw InversionError("no sampled flows in '" + o.in + "'");
    const auto x = observed_from_histogram(hist, o.p);
    InversionResult r;
    if (o.method == "sh-packet") {
      r = invert_sh_packet(x, o.p);
    } else {
      const double mean = o.mean_bytes ? *o.mean_bytes : mean_sampled_packet_len(flows);
      r = invert_sh_byte(x, o.p, mean);
      j["mean_packet_len"] = mean;
    }
    j.update(to_json(r));
    if (!r.negative_indices.empty()) {
      std::fprintf(stderr, "warning: %zu negative raw estimates\n", r.negative_indices.size());
    }
    observed = x.probs;
  } else {
    throw ConfigError("unknown inversion method '" + o.method + "'");
  }
  const auto raw = j.at("raw").get<std::vector<double>>();
  const auto bins = make_bins(std::max<std::size_t>(raw.size(), 1), ratio_for_bins_per_decade(o.bins_per_decade));
  const auto pooled = pool_estimates(raw, bins);
  j["method"] = o.method;
  j["observed"] = observed;
  j["bins"] = pooled.boundaries;
  j["pooled_raw"] = pooled.raw;
  j["pooled_clamped"] = pooled.clamped;
  j["sampled_flows"] = flows.records.size();
  j["sampled_packets"] = flows.packets_admitted;
  auto out = open_output(o.out);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + o.out + "'");
  std::printf("method=%s C=%.10g negative=%zu flows=%zu\n", o.method.c_str(), j.at("C").get<double>(),
              j.at("negative_indices").size(), flows.records.size());
  return 0;
}

struct CompareOptions {
  std::string truth;
  std::string estimate;
  double bins_per_decade = kDefaultBinsPerDecade;
  std::uint64_t seed = 1;
  TableOptions table;  // recorded in the report metadata
  std::string out;
};

int run_compare(const CompareOptions& o) {
  const auto truth_flows = load_flows(o.truth);
  std::ifstream est_in(o.estimate, std::ios::binary);
  if (!est_in) throw IoError("cannot read '" + o.estimate + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(est_in);
  } catch (const nlohmann::json::exception& e) {
    throw InversionError(o.estimate + ": " + e.what());
  }
  const auto inversion = inversion_from_json(j);
  const bool tcp_only = j.value("tcp_only", false);
  const auto truth_hist = tcp_only ? tcp_flow_length_histogram(truth_flows) : flow_length_histogram(truth_flows);
  const auto truth = histogram_weights(truth_hist);
  ObservedDistribution sampled{j.value("observed", std::vector<double>{}), inversion.p, 0.0};
  const std::size_t max_len = std::max({truth.size(), inversion.raw_estimates.size(), sampled.probs.size(),
                                        std::size_t{1}});
  const auto bins = make_bins(max_len, ratio_for_bins_per_decade(o.bins_per_decade));

  ReportMetadata meta;
  meta.method = j.value("method", std::string{});
  meta.p = inversion.p;
  meta.seed = o.seed;
  meta.flow_timeout = o.table.tt;
  meta.export_timeout = o.table.tw;
  meta.buffer_capacity = o.table.nf;
  meta.packets_sampled = j.value("sampled_packets", std::uint64_t{0});
  meta.flows_formed = j.value("sampled_flows", std::uint64_t{0});
  meta.mean_flow_length = meta.flows_formed == 0 ? 0.0
                                                 : static_cast<double>(meta.packets_sampled) /
                                                       static_cast<double>(meta.flows_formed);
  const auto report = build_report(truth, sampled, inversion, bins, meta);
  emit_plot_data(report, o.out);
  std::printf("total_variation=%.6f ccdf_max_gap=%.6f bins=%zu\n", report.total_variation,
              report.ccdf_max_gap, report.per_bin_table.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-length distribution estimation under packet sampling and sample-and-hold"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic heavy-tailed trace");
  generate->add_option("--flows", gen.cfg.num_flows, "Number of flows")->required();
  generate->add_option("--alpha", gen.cfg.alpha, "Tail exponent in (0,2)")->capture_default_str();
  generate->add_option("--min-len", gen.cfg.min_flow_len, "Shortest flow")->capture_default_str();
  generate->add_option("--max-len", gen.cfg.max_flow_len, "Longest flow")->capture_default_str();
  generate->add_option("--seed", gen.cfg.seed, "Random seed")->capture_default_str();
  generate->add_option("--tcp-fraction", gen.cfg.tcp_fraction)->capture_default_str();
  generate->add_option("--extra-syn", gen.cfg.extra_syn_prob, "Probability of a second SYN")->capture_default_str();
  generate->add_option("--extra-syn-max-len", gen.cfg.extra_syn_max_len, "Longest flow eligible for a second SYN (0 = any)");
  generate->add_option("--mean-interarrival", gen.cfg.mean_interarrival, "Seconds between flow starts")->capture_default_str();
  generate->add_option("--mean-gap", gen.cfg.mean_packet_gap, "Seconds between packets of a flow")->capture_default_str();
  generate->add_option("--bytes-min", gen.bytes_min)->capture_default_str();
  generate->add_option("--bytes-max", gen.bytes_max)->capture_default_str();
  generate->add_option("--format", gen.format)->check(CLI::IsMember({"text", "pcap"}))->capture_default_str();
  generate->add_option("--truth", gen.truth, "Also write the ground-truth length histogram");
  generate->add_option("--out", gen.out)->required();

  std::string flows_in, flows_out;
  TableOptions flows_table;
  auto* flows_cmd = app.add_subcommand("flows", "Build unsampled (ground-truth) flows");
  flows_cmd->add_option("--in", flows_in)->required();
  add_table_options(flows_cmd, flows_table);
  flows_cmd->add_option("--out", flows_out)->required();

  SampleOptions sample;
  auto* sample_cmd = app.add_subcommand("sample", "Sample a trace and build flows");
  sample_cmd->add_option("--in", sample.in)->required();
  sample_cmd->add_option("--method", sample.method)
      ->required()
      ->check(CLI::IsMember({"packet", "sh-packet", "sh-byte", "sh-syn"}));
  auto* p_opt = sample_cmd->add_option("--p", sample.p, "Sampling probability")->check(CLI::Range(0.0, 1.0));
  auto* t_opt = sample_cmd->add_option("--target-fraction", sample.target, "Calibrate p to this packet fraction")
                    ->check(CLI::Range(0.0, 1.0));
  p_opt->excludes(t_opt);
  sample_cmd->add_option("--seed", sample.seed)->capture_default_str();
  add_table_options(sample_cmd, sample.table);
  sample_cmd->add_option("--out", sample.out)->required();

  InvertOptions inv;
  auto* invert_cmd = app.add_subcommand("invert", "Estimate the original flow-length distribution");
  invert_cmd->add_option("--in", inv.in)->required();
  invert_cmd->add_option("--method", inv.method)->required()->check(CLI::IsMember({"sh-packet", "sh-byte", "syn"}));
  invert_cmd->add_option("--p", inv.p)->required()->check(CLI::Range(0.0, 1.0));
  invert_cmd->add_option("--mean-bytes", inv.mean_bytes, "Mean packet length for sh-byte (default: sampled mean)");
  invert_cmd->add_option("--bins-per-decade", inv.bins_per_decade)->capture_default_str();
  invert_cmd->add_option("--out", inv.out)->required();

  CompareOptions cmp;
  auto* compare_cmd = app.add_subcommand("compare", "Compare an estimate against ground-truth flows");
  compare_cmd->add_option("--truth", cmp.truth)->required();
  compare_cmd->add_option("--estimate", cmp.estimate)->required();
  compare_cmd->add_option("--bins-per-decade", cmp.bins_per_decade)->capture_default_str();
  compare_cmd->add_option("--seed", cmp.seed, "Sampling seed, recorded in the metadata")->capture_default_str();
  add_table_options(compare_cmd, cmp.table);
  compare_cmd->add_option("--out", cmp.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (sample_cmd->parsed() && !sample.p && !sample.target) {
    std::cerr << "sample: one of --p or --target-fraction is required\n";
    return kExitUsage;
  }

  try {
    if (generate->parsed()) return run_generate(gen);
    if (flows_cmd->parsed()) return run_flows(flows_in, flows_table, flows_out);
    if (sample_cmd->parsed()) return run_sample(sample);
    if (invert_cmd->parsed()) return run_invert(inv);
    if (compare_cmd->parsed()) return run_compare(cmp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
