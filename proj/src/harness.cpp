#include "fedem/harness.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include "fedem/attack.hpp"
#include "fedem/io.hpp"
#include "fedem/ldp.hpp"
#include "fedem/perturb.hpp"

namespace fedem {

static_assert(std::endian::native == std::endian::little,
              "artifact blobs are little-endian raw doubles");

std::string RunPaths::target(int r, int client, int sample) const {
  return round_dir(r) + "/target_c" + std::to_string(client) + "_s" + std::to_string(sample) +
         ".bin";
}

std::string resolve_output_root(const ExperimentManifest& m) {
  const char* env = std::getenv("FEDEM_OUTPUT_ROOT");
  if (env && *env) return env;
  return m.output_root;
}

RunPaths run_paths(const ExperimentManifest& m) {
  return RunPaths{resolve_output_root(m) + "/" + m.name};
}

namespace {

std::string find_data_file(const std::string& dir, const std::string& base) {
  for (const char* suffix : {"", ".gz"}) {
    std::string p = dir + "/" + base + suffix;
    if (std::filesystem::exists(p)) return p;
  }
  throw DataError("missing " + base + "[.gz] under " + dir);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string first_line(const std::string& text) {
  auto pos = text.find('\n');
  return pos == std::string::npos ? text : text.substr(0, pos);
}

}  // namespace

NormalizationTransform transform_for(const ExperimentManifest& m, std::size_t channels) {
  if (!m.normalize) return {};
  if (!m.mean_override.empty()) {
    if (m.mean_override.size() != channels)
      throw ConfigError("[dataset].mean has " + std::to_string(m.mean_override.size()) +
                        " entries but the data has " + std::to_string(channels) + " channels");
    return {m.mean_override, m.std_override};
  }
  NormalizationTransform t = stats_for(m.dataset_name);
  if (!t.identity() && t.mean.size() != channels)
    throw ConfigError("built-in statistics for '" + m.dataset_name +
                      "' do not match the channel count of the data");
  return t;
}

LoadedData load_data(const ExperimentManifest& m) {
  LoadedData out;
  if (m.dataset_kind == "synth") {
    SeedSplitter seeds(m.seed);
    out.train = synth_blobs(m.synth_classes, m.synth_per_class, m.synth_dims,
                            seeds.derive("synth-train"));
    out.test = synth_blobs(m.synth_classes, std::max(m.synth_per_class / 4, 1), m.synth_dims,
                           seeds.derive("synth-test"));
  } else if (m.dataset_kind == "idx") {
    out.train = load_idx(find_data_file(m.dataset_dir, "train-images-idx3-ubyte"),
                         find_data_file(m.dataset_dir, "train-labels-idx1-ubyte"));
    out.test = load_idx(find_data_file(m.dataset_dir, "t10k-images-idx3-ubyte"),
                        find_data_file(m.dataset_dir, "t10k-labels-idx1-ubyte"));
  } else {
    std::vector<std::string> batches;
    for (int i = 1; i <= 5; ++i)
      batches.push_back(find_data_file(m.dataset_dir, "data_batch_" + std::to_string(i) + ".bin"));
    out.train = load_cifar10(batches);
    out.test = load_cifar10({find_data_file(m.dataset_dir, "test_batch.bin")});
  }
  out.train.name = out.test.name = m.dataset_name;
  out.train.split = "train";
  out.test.split = "test";
  out.transform = transform_for(m, out.train.channels);
  return out;
}

ModelSpec resolve_model(const ExperimentManifest& m, const LoadedData& d) {
  if (d.train.channels != d.test.channels || d.train.height != d.test.height ||
      d.train.width != d.test.width)
    throw DataError("train and test splits disagree on image geometry");
  ModelSpec spec = m.model;
  spec.channels = d.train.channels;
  spec.height = d.train.height;
  spec.width = d.train.width;
  int mx = 0;
  for (int l : d.train.labels) mx = std::max(mx, l);
  for (int l : d.test.labels) mx = std::max(mx, l);
  spec.classes = static_cast<std::size_t>(mx) + 1;
  if (spec.classes < 2) throw DataError("dataset carries a single class; nothing to learn");
  try {
    spec.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("[model]: ") + e.what());
  }
  return spec;
}

void save_target(const std::string& path, const AttackTarget& t, std::size_t channels,
                 std::size_t height, std::size_t width) {
  std::ostringstream head;
  head << "target v1\n"
       << t.round << " " << t.client << " " << t.sample << " " << t.label << "\n"
       << channels << " " << height << " " << width << "\n"
       << t.original.data.size() << " " << t.gradient.size() << "\n";
  std::string blob = head.str();
  std::size_t doubles = t.original.data.size() + t.gradient.size();
  std::size_t off = blob.size();
  blob.resize(off + doubles * sizeof(double));
  std::memcpy(blob.data() + off, t.original.data.data(),
              t.original.data.size() * sizeof(double));
  std::memcpy(blob.data() + off + t.original.data.size() * sizeof(double), t.gradient.data(),
              t.gradient.size() * sizeof(double));
  write_text_file(path, blob);
}

AttackTarget load_target(const std::string& path, std::size_t* channels, std::size_t* height,
                         std::size_t* width) {
  std::string blob = read_text_file(path);
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    pos = blob.find('\n', pos);
    if (pos == std::string::npos) throw std::runtime_error("truncated target header: " + path);
    ++pos;
  }
  std::istringstream head(blob.substr(0, pos));
  std::string tag, version;
  AttackTarget t;
  std::size_t c = 0, h = 0, w = 0, d = 0, p = 0;
  head >> tag >> version >> t.round >> t.client >> t.sample >> t.label >> c >> h >> w >> d >> p;
  if (!head || tag != "target" || version != "v1")
    throw std::runtime_error("not a target blob: " + path);
  if (d != c * h * w) throw std::runtime_error("target geometry mismatch: " + path);
  if (blob.size() - pos != (d + p) * sizeof(double))
    throw std::runtime_error("target payload size mismatch: " + path);
  t.original = Tensor::zeros({1, d});
  t.gradient.resize(p);
  std::memcpy(t.original.data.data(), blob.data() + pos, d * sizeof(double));
  std::memcpy(t.gradient.data(), blob.data() + pos + d * sizeof(double), p * sizeof(double));
  *channels = c;
  *height = h;
  *width = w;
  return t;
}

namespace {

MetricReport read_report_row(const std::string& path) {
  MetricReport rep;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rep.test_acc = rep.val_acc = rep.test_mse = rep.fea_mse = rep.ssim = rep.psnr = nan;
  if (!std::filesystem::exists(path)) return rep;
  std::istringstream in(read_text_file(path));
  std::string header, row;
  if (!std::getline(in, header) || !std::getline(in, row)) return rep;
  auto f = split_csv(row);
  auto field = [&](std::size_t i) { return i < f.size() ? std::strtod(f[i].c_str(), nullptr) : nan; };
  rep.test_acc = field(3);
  rep.val_acc = field(4);
  rep.test_mse = field(5);
  rep.fea_mse = field(6);
  rep.ssim = field(7);
  rep.psnr = field(8);
  return rep;
}

void write_report(const RunPaths& paths, const ExperimentManifest& m, const MetricReport& rep) {
  write_text_file(paths.report(), metric_csv_header() + "\n" +
                                      metric_csv_row(m.name, m.dataset_name,
                                                     defense_name(m.fed.defense), rep) +
                                      "\n");
}

/// Reconstruction pass over the artifacts already on disk. Shared verbatim
/// between the end of a training run and the standalone attack command, so
/// both produce identical outputs.
void attack_phase(const ExperimentManifest& m, const RunPaths& paths, std::ostream& log) {
  std::ostringstream csv;
  csv << "round,client,sample,label,final_match_loss,failed_restarts,mse,fea_mse,ssim,psnr\n";
  double sum_mse = 0, sum_fea = 0, sum_ssim = 0, sum_psnr = 0;
  std::size_t n_targets = 0;
  SeedSplitter seeds(m.seed);

  for (int r : m.resolved_attack_rounds()) {
    if (!std::filesystem::exists(paths.theta(r))) {
      log << "  round " << r << ": no stored artifacts (run ended before it); skipping\n";
      continue;
    }
    ParameterSet theta = load_params(paths.theta(r));
    if (theta.spec.kind == ModelSpec::Kind::kCnn)
      throw ConfigError(
          "gradient inversion is unavailable for cnn checkpoints: the conv layers expose no "
          "second derivative");

    std::vector<AttackTarget> targets;
    std::size_t ch = 0, h = 0, w = 0;
    std::istringstream index(read_text_file(paths.targets_index(r)));
    std::string line;
    std::getline(index, line);  // header
    while (std::getline(index, line)) {
      if (line.empty() || line == "\r") continue;
      auto f = split_csv(line);
      if (f.size() != 4) throw std::runtime_error("malformed row in " + paths.targets_index(r));
      int client = std::stoi(f[1]), sample = std::stoi(f[2]);
      std::size_t tc, th, tw;
      AttackTarget t = load_target(paths.target(r, client, sample), &tc, &th, &tw);
      if (targets.empty()) {
        ch = tc;
        h = th;
        w = tw;
      } else if (tc != ch || th != h || tw != w) {
        throw std::runtime_error("stored targets disagree on geometry in " + paths.round_dir(r));
      }
      targets.push_back(std::move(t));
    }
    if (targets.empty()) {
      log << "  round " << r << ": no stored targets; skipping\n";
      continue;
    }
    if (theta.spec.channels != ch || theta.spec.height != h || theta.spec.width != w)
      throw std::runtime_error("stored targets do not match the checkpoint geometry in " +
                               paths.round_dir(r));

    AttackConfig cfg = m.attack;
    cfg.batch = 1;
    NormalizationTransform t = transform_for(m, ch);
    std::vector<ReconstructionResult> results = attack_round(theta, targets, cfg, seeds);

    make_dirs(paths.images_dir(r));
    make_dirs(paths.traces_dir(r));
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const AttackTarget& tg = targets[i];
      const ReconstructionResult& rr = results[i];
      Tensor recon = denormalize(t, rr.x_hat, ch, h * w);
      double v_mse = mse(recon, tg.original);
      double v_fea = feature_mse(theta, t, recon, tg.original);
      double v_ssim = ssim(recon, tg.original, ch, h, w);
      double v_psnr = psnr(recon, tg.original);
      csv << r << ',' << tg.client << ',' << tg.sample << ',' << tg.label << ','
          << format_double(rr.final_loss) << ',' << rr.failed_restarts << ','
          << format_double(v_mse) << ',' << format_double(v_fea) << ','
          << format_double(v_ssim) << ',' << format_double(v_psnr) << "\n";
      sum_mse += v_mse;
      sum_fea += v_fea;
      sum_ssim += v_ssim;
      sum_psnr += v_psnr;
      ++n_targets;

      std::string tag = "_c" + std::to_string(tg.client) + "_s" + std::to_string(tg.sample);
      write_image(paths.images_dir(r) + "/recon" + tag, recon.data, ch, h, w);
      std::ostringstream trace;
      trace << "restart,iter,match_loss\n";
      for (std::size_t s = 0; s < rr.traces.size(); ++s)
        for (std::size_t it = 0; it < rr.traces[s].size(); ++it)
          trace << s << ',' << it << ',' << format_double(rr.traces[s][it]) << "\n";
      write_text_file(paths.traces_dir(r) + "/trace" + tag + ".csv", trace.str());
    }
    log << "  attacked round " << r << ": " << targets.size() << " images\n";
  }

  write_text_file(paths.attack_csv(), csv.str());
  MetricReport rep = read_report_row(paths.report());
  if (n_targets > 0) {
    double n = static_cast<double>(n_targets);
    rep.test_mse = sum_mse / n;
    rep.fea_mse = sum_fea / n;
    rep.ssim = sum_ssim / n;
    rep.psnr = sum_psnr / n;
  }
  write_report(paths, m, rep);
}

int write_status_and_code(const RunPaths& paths, std::ostream& log, const char* status,
                          const std::string& msg, int code) {
  try {
    write_text_file(paths.status(), msg.empty() ? std::string(status) + "\n"
                                                : std::string(status) + "\n" + msg + "\n");
  } catch (const std::exception&) {
    // the directory itself is gone; the log line below still tells the story
  }
  if (!msg.empty()) log << status << ": " << msg << "\n";
  return code;
}

}  // namespace

int run_experiment(const ExperimentManifest& m, std::ostream& log) {
  RunPaths paths = run_paths(m);
  try {
    std::filesystem::remove_all(paths.dir);  // reruns replace the whole run directory
    make_dirs(paths.dir);
    write_text_file(paths.manifest(), m.echo());
  } catch (const std::exception& e) {
    log << "error: cannot set up " << paths.dir << ": " << e.what() << "\n";
    return 2;
  }

  try {
    LoadedData data = load_data(m);
    ModelSpec spec = resolve_model(m, data);
    if (m.attack.enabled && spec.kind == ModelSpec::Kind::kCnn)
      throw ConfigError(
          "gradient inversion is unavailable for cnn models (the conv layers expose no second "
          "derivative); set [attack].enabled = false");

    TrainSetup setup;
    setup.model = spec;
    setup.fed = m.fed;
    setup.perturb = m.perturb;
    setup.noise = m.noise;
    setup.transform = data.transform;
    setup.master_seed = m.seed;
    if (m.attack.enabled) setup.attack_rounds = m.resolved_attack_rounds();
    setup.images_per_client = m.attack.images_per_client;

    log << "run " << m.name << ": " << data.train.size() << " train / " << data.test.size()
        << " test images, model " << spec.to_string() << ", defense "
        << defense_name(m.fed.defense) << "\n";

    TrainResult result = train(setup, data.train, data.test);

    write_text_file(paths.rounds(), rounds_csv(result.records));
    save_params(paths.best(), result.best);
    save_params(paths.final_model(), result.final_params);
    log << "  " << result.stop_reason << " after " << result.records.size()
        << " rounds; best val acc " << format_double(result.best_val_acc) << " at round "
        << result.best_round << "\n";

    for (const RoundArtifacts& art : result.artifacts) {
      make_dirs(paths.round_dir(art.round));
      make_dirs(paths.images_dir(art.round));
      save_params(paths.theta(art.round), art.theta);
      std::ostringstream index;
      index << "round,client,sample,label\n";
      for (const AttackTarget& t : art.targets) {
        save_target(paths.target(art.round, t.client, t.sample), t, data.train.channels,
                    data.train.height, data.train.width);
        index << t.round << ',' << t.client << ',' << t.sample << ',' << t.label << "\n";
        std::string tag = "_c" + std::to_string(t.client) + "_s" + std::to_string(t.sample);
        write_image(paths.images_dir(art.round) + "/orig" + tag, t.original.data,
                    data.train.channels, data.train.height, data.train.width);
      }
      write_text_file(paths.targets_index(art.round), index.str());
    }

    MetricReport rep;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.val_acc = result.best_val_acc;
    rep.test_acc = result.best_round >= 1
                       ? result.records[static_cast<std::size_t>(result.best_round) - 1].test_acc
                       : nan;
    rep.test_mse = rep.fea_mse = rep.ssim = rep.psnr = nan;
    write_report(paths, m, rep);

    if (m.attack.enabled && !result.artifacts.empty()) attack_phase(m, paths, log);

    return write_status_and_code(paths, log, "ok", "", 0);
  } catch (const ConfigError& e) {
    return write_status_and_code(paths, log, "config-error", e.what(), 1);
  } catch (const DataError& e) {
    return write_status_and_code(paths, log, "dataset-error", e.what(), 2);
  } catch (const std::exception& e) {
    return write_status_and_code(paths, log, "runtime-error", e.what(), 2);
  }
}

int run_attack_phase(const std::string& run_dir, std::ostream& log) {
  RunPaths paths{run_dir};
  try {
    ExperimentManifest m = ExperimentManifest::load(paths.manifest());
    attack_phase(m, paths, log);
    return write_status_and_code(paths, log, "ok", "", 0);
  } catch (const ConfigError& e) {
    return write_status_and_code(paths, log, "config-error", e.what(), 1);
  } catch (const DataError& e) {
    return write_status_and_code(paths, log, "dataset-error", e.what(), 2);
  } catch (const std::exception& e) {
    return write_status_and_code(paths, log, "runtime-error", e.what(), 2);
  }
}

namespace {

std::string sweep_value_string(const SweepSpec& sw, std::size_t i) {
  return sw.axis == SweepSpec::Axis::kMethod ? sw.str_values[i]
                                             : format_double(sw.num_values[i]);
}

}  // namespace

int run_sweep(const SweepSpec& sw, std::ostream& log) {
  std::string root = resolve_output_root(sw.base);
  std::string sweep_dir = root + "/" + sw.base.name + "-sweep-" + axis_name(sw.axis);
  make_dirs(sweep_dir);

  std::ostringstream rows, tradeoff;
  rows << "value,run,status,test_acc,val_acc,test_mse,fea_mse,ssim,psnr\n";
  tradeoff << axis_name(sw.axis) << ",test_acc,test_mse\n";
  std::size_t ok_count = 0;

  for (std::size_t i = 0; i < sw.count(); ++i) {
    std::string value = sweep_value_string(sw, i);
    ExperimentManifest mi;
    try {
      mi = sw.instantiate(i);
    } catch (const ConfigError& e) {
      log << "sweep point " << value << ": config-error: " << e.what() << "\n";
      rows << value << ",,config-error,nan,nan,nan,nan,nan,nan\n";
      continue;
    }
    int code = run_experiment(mi, log);
    RunPaths paths = run_paths(mi);
    std::string status = "runtime-error";
    if (std::filesystem::exists(paths.status()))
      status = first_line(read_text_file(paths.status()));
    MetricReport rep = read_report_row(paths.report());
    rows << value << ',' << mi.name << ',' << status << ',' << format_double(rep.test_acc) << ','
         << format_double(rep.val_acc) << ',' << format_double(rep.test_mse) << ','
         << format_double(rep.fea_mse) << ',' << format_double(rep.ssim) << ','
         << format_double(rep.psnr) << "\n";
    if (code == 0) {
      ++ok_count;
      tradeoff << value << ',' << format_double(rep.test_acc) << ','
               << format_double(rep.test_mse) << "\n";
    }
  }

  write_text_file(sweep_dir + "/sweep.csv", rows.str());
  write_text_file(sweep_dir + "/tradeoff.csv", tradeoff.str());
  log << "sweep over " << axis_name(sw.axis) << ": " << ok_count << "/" << sw.count()
      << " points completed; tables under " << sweep_dir << "\n";
  return ok_count > 0 ? 0 : 2;
}

int render_report(const std::vector<std::string>& run_dirs, const std::string& out_csv,
                  std::ostream& log) {
  struct Row {
    std::vector<std::string> fields;  // run,dataset,method + 6 metrics
  };
  std::vector<Row> table;

  for (const std::string& dir : run_dirs) {
    RunPaths paths{dir};
    if (!std::filesystem::exists(paths.status())) {
      log << "warning: skipping " << dir << " (no status file)\n";
      continue;
    }
    std::string status = first_line(read_text_file(paths.status()));
    if (status != "ok") {
      log << "warning: skipping " << dir << " (status " << status << ")\n";
      continue;
    }
    if (!std::filesystem::exists(paths.report())) {
      log << "warning: skipping " << dir << " (no report.csv)\n";
      continue;
    }
    std::istringstream in(read_text_file(paths.report()));
    std::string header, row;
    if (!std::getline(in, header) || !std::getline(in, row) || row.empty()) {
      log << "warning: skipping " << dir << " (empty report.csv)\n";
      continue;
    }
    auto f = split_csv(row);
    if (f.size() < 9) {
      log << "warning: " << dir << ": report row has " << f.size()
          << " columns, padding the rest with nan\n";
      f.resize(9, "nan");
    }
    f.resize(9);
    table.push_back({std::move(f)});
  }

  if (table.empty()) {
    log << "no completed runs to report\n";
    return 2;
  }
  std::sort(table.begin(), table.end(), [](const Row& a, const Row& b) {
    if (a.fields[1] != b.fields[1]) return a.fields[1] < b.fields[1];  // dataset
    if (a.fields[2] != b.fields[2]) return a.fields[2] < b.fields[2];  // method
    return a.fields[0] < b.fields[0];                                  // run
  });

  auto header_fields = split_csv(metric_csv_header());
  std::vector<std::size_t> width(header_fields.size());
  for (std::size_t c = 0; c < header_fields.size(); ++c) {
    width[c] = header_fields[c].size();
    for (const Row& r : table) width[c] = std::max(width[c], r.fields[c].size());
  }
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t c = 0; c < fields.size(); ++c) {
      log << fields[c];
      if (c + 1 < fields.size()) log << std::string(width[c] - fields[c].size() + 2, ' ');
    }
    log << "\n";
  };
  emit(header_fields);
  for (const Row& r : table) emit(r.fields);

  if (!out_csv.empty()) {
    std::ostringstream csv;
    csv << metric_csv_header() << "\n";
    for (const Row& r : table) {
      for (std::size_t c = 0; c < r.fields.size(); ++c) csv << (c ? "," : "") << r.fields[c];
      csv << "\n";
    }
    write_text_file(out_csv, csv.str());
    log << "combined table written to " << out_csv << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// selftest

namespace {

std::string check_gradient_oracle() {
  Rng rng(7);
  auto rand_tensor = [&](Shape s) {
    Tensor t = Tensor::zeros(s);
    for (double& v : t.data) v = rng.uniform(-0.8, 0.8);
    return t;
  };
  Tensor x = rand_tensor({2, 3}), w1 = rand_tensor({3, 4}), b1 = rand_tensor({4}),
         w2 = rand_tensor({4, 2}), b2 = rand_tensor({2});
  GraphBuilder f = [](Graph& g, const std::vector<NodeId>& in) {
    NodeId h = g.sigmoid(g.bias_add(g.matmul(in[0], in[1]), in[2]));
    NodeId z = g.bias_add(g.matmul(h, in[3]), in[4]);
    return g.softmax_cross_entropy(z, {0, 1});
  };
  double err = grad_check(f, {x, w1, b1, w2, b2}, 1e-5);
  if (err > 1e-6) return "finite-difference mismatch " + format_double(err);
  return "";
}

std::string check_second_order() {
  Graph g;
  Tensor xt = Tensor::zeros({3});
  xt.data = {1.5, -2.0, 0.25};
  Tensor at = Tensor::zeros({3});
  at.data = {2.0, -1.0, 3.0};
  NodeId x = g.leaf(xt);
  NodeId loss = g.sum(g.square(x));
  std::vector<NodeId> wrt{x};
  NodeId gx = g.grad(loss, wrt)[0];
  NodeId h = g.sum(g.mul(gx, g.constant(at)));
  NodeId hx = g.grad(h, wrt)[0];
  for (std::size_t i = 0; i < 3; ++i)
    if (std::fabs(g.value(hx).data[i] - 2.0 * at.data[i]) > 1e-12)
      return "second derivative of sum(x^2) should be exactly 2";
  return "";
}

std::string check_annulus() {
  PerturbationConfig outer;
  outer.rho_max = 8;
  outer.rho_min = 0;
  Tensor d = Tensor::zeros({2});
  d.data = {16, -4};
  Tensor r = project_annulus(d, outer);
  if (r.data[0] != 8 || r.data[1] != -4) return "clamp to [-8, 8] failed";

  PerturbationConfig ring;
  ring.rho_max = 8;
  ring.rho_min = 2;
  d.data = {1, 0.5};
  r = project_annulus(d, ring);
  if (r.data[0] != 2 || r.data[1] != 1) return "rescale onto the inner radius failed";
  d = Tensor::zeros({1});
  d.data = {3};
  r = project_annulus(d, ring);
  if (r.data[0] != 3) return "in-annulus points must pass through";
  return "";
}

std::string check_clip() {
  std::vector<double> g{3, 4};
  auto c = clip_gradient(g, 2.5);
  if (c[0] != 1.5 || c[1] != 2.0) return "norm-5 vector clipped to 2.5 should be {1.5, 2}";
  auto same = clip_gradient(g, 10.0);
  if (same != g) return "under-norm vectors must pass through";
  return "";
}

std::string check_noise_moments() {
  const std::size_t n = 100000;
  NoiseSpec gauss{NoiseSpec::Mechanism::kGaussian, 2.0, 0.0};
  Rng r1(11);
  std::vector<double> z(n, 0.0);
  auto g = add_noise(z, gauss, r1);
  double mean = 0, var = 0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(n);
  for (double v : g) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (std::fabs(mean) > 0.026) return "gaussian mean drifted: " + format_double(mean);
  if (std::fabs(var - 4.0) > 0.08) return "gaussian variance drifted: " + format_double(var);

  NoiseSpec lap{NoiseSpec::Mechanism::kLaplace, 1.0, 0.0};
  Rng r2(12);
  auto l = add_noise(z, lap, r2);
  mean = 0;
  var = 0;
  for (double v : l) mean += v;
  mean /= static_cast<double>(n);
  for (double v : l) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (std::fabs(mean) > 0.018) return "laplace mean drifted: " + format_double(mean);
  if (std::fabs(var - 2.0) > 0.06) return "laplace variance drifted: " + format_double(var);
  return "";
}

std::string check_linear_inversion_identity() {
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::kMlp;
  spec.channels = 1;
  spec.height = 1;
  spec.width = 4;
  spec.classes = 3;
  spec.hidden.clear();
  ParameterSet theta = init_params(spec, 99);
  Tensor x = Tensor::zeros({1, 4});
  x.data = {0.2, 0.7, 0.4, 0.9};
  std::vector<double> g = client_gradient(theta, x, {1}, {});
  const std::size_t d = 4, n = 3;
  for (std::size_t i = 0; i < n; ++i) {
    double db = g[d * n + i];
    if (std::fabs(db) < 1e-8) continue;
    for (std::size_t j = 0; j < d; ++j)
      if (std::fabs(g[j * n + i] / db - x.data[j]) > 1e-9)
        return "weight/bias gradient ratio should reproduce the input exactly";
  }
  return "";
}

std::string check_federated_step() {
  Dataset train_ds = synth_blobs(3, 20, 6, 4242);
  Dataset test_ds = synth_blobs(3, 5, 6, 4243);
  TrainSetup setup;
  setup.model.kind = ModelSpec::Kind::kMlp;
  setup.model.channels = train_ds.channels;
  setup.model.height = train_ds.height;
  setup.model.width = train_ds.width;
  setup.model.classes = 3;
  setup.model.hidden = {8};
  setup.fed.clients = 1;
  setup.fed.per_round = 1;
  setup.fed.lr = 0.5;
  setup.fed.patience = 5;
  setup.master_seed = 3;

  setup.fed.rounds = 0;
  ParameterSet theta0 = train(setup, train_ds, test_ds).final_params;
  setup.fed.rounds = 1;
  ParameterSet theta1 = train(setup, train_ds, test_ds).final_params;

  TrainValSplit split = split_train_val(train_ds.size());
  Tensor x = gather_flat(train_ds, split.train);
  std::vector<int> y = gather_labels(train_ds, split.train);
  std::vector<double> g = client_gradient(theta0, x, y, {});
  std::vector<double> want = theta0.flatten();
  for (std::size_t i = 0; i < want.size(); ++i) want[i] -= setup.fed.lr * g[i];
  std::vector<double> got = theta1.flatten();
  for (std::size_t i = 0; i < want.size(); ++i)
    if (std::fabs(got[i] - want[i]) > 1e-10)
      return "one aggregated round must equal one plain gradient step";
  return "";
}

std::string check_metric_values() {
  Tensor a = Tensor::zeros({1, 4}), b = Tensor::zeros({1, 4});
  a.data = {0, 0.5, 1, 0.25};
  b.data = {0.5, 0.5, 0.5, 0.25};
  double want = (0.25 + 0 + 0.25 + 0) / 4.0;
  if (std::fabs(mse(a, b) - want) > 1e-15) return "mse of a known pair is off";
  if (!std::isinf(psnr(a, a))) return "psnr of identical images should be infinite";
  if (ssim(a, a, 1, 2, 2) != 1.0) return "ssim of an image with itself should be exactly 1";
  return "";
}

std::string check_attack_descends() {
  ModelSpec spec;
  spec.kind = ModelSpec::Kind::kMlp;
  spec.channels = 1;
  spec.height = 1;
  spec.width = 4;
  spec.classes = 2;
  spec.hidden.clear();
  ParameterSet theta = init_params(spec, 5);
  Tensor x = Tensor::zeros({1, 4});
  x.data = {0.1, 0.9, 0.3, 0.6};
  std::vector<double> g = client_gradient(theta, x, {1}, {});

  AttackConfig cfg;
  cfg.iterations = 60;
  cfg.lr = 0.5;
  cfg.restarts = 1;
  cfg.batch = 1;
  cfg.label_mode = AttackConfig::LabelMode::kKnown;
  SeedSplitter seeds(17);
  ReconstructionResult res = reconstruct(theta, g, {1}, cfg, seeds, 1);
  if (!(res.final_loss >= 0) || !std::isfinite(res.final_loss))
    return "matching loss must stay finite and non-negative";
  if (res.traces.empty() || res.traces[0].back() >= res.traces[0].front())
    return "matching loss should fall over the descent";
  return "";
}

}  // namespace

int selftest(std::ostream& log) {
  int failures = 0;
  auto run = [&](const char* name, std::string (*fn)()) {
    std::string err;
    try {
      err = fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    if (err.empty()) {
      log << "PASS " << name << "\n";
    } else {
      log << "FAIL " << name << ": " << err << "\n";
      ++failures;
    }
  };
  run("gradient-oracle", check_gradient_oracle);
  run("second-order", check_second_order);
  run("annulus-projection", check_annulus);
  run("gradient-clip", check_clip);
  run("noise-moments", check_noise_moments);
  run("linear-inversion-identity", check_linear_inversion_identity);
  run("federated-step", check_federated_step);
  run("metric-values", check_metric_values);
  run("attack-descends", check_attack_descends);
  if (failures == 0) log << "all checks passed\n";
  return failures == 0 ? 0 : 2;
}

}  // namespace fedem
