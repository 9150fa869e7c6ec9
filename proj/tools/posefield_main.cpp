// Command-line front end for the pose-distance-field library.
//
// Every command takes --config <file.json> plus flags that mirror the config
// keys one-to-one; a flag always overrides the config value. Relative paths
// inside a config file resolve against the config file's directory; relative
// paths given on the command line resolve against the working directory.
// Report files are written with 17-significant-digit floats so reruns with
// the same config are byte-identical.
//
// Exit codes: 0 success, 2 config/validation error, 3 I/O error,
// 4 numerical failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "posefield/distance_field.hpp"
#include "posefield/errors.hpp"
#include "posefield/ik.hpp"
#include "posefield/io.hpp"
#include "posefield/pose_corpus.hpp"
#include "posefield/prior_ops.hpp"
#include "posefield/projector.hpp"
#include "posefield/random.hpp"
#include "posefield/robot_model.hpp"
#include "posefield/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace posefield;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;
constexpr int kNumericalError = 4;

// RNG stream tag for denoise's random starts ("dnz").
constexpr std::uint64_t kTagDenoiseStart = 0x646e7au;

int classify(const Error& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatVersionError*>(&e)) {
    return kIoError;
  }
  if (dynamic_cast<const DivergedLoss*>(&e) || dynamic_cast<const NonFiniteParameters*>(&e) ||
      dynamic_cast<const NearPiSingularity*>(&e) || dynamic_cast<const SingularSystem*>(&e)) {
    return kNumericalError;
  }
  return kConfigError;
}

// ---------------------------------------------------------------------------
// Config files

// Pulls typed values out of one JSON config. Every key must be consumed by
// the owning command; leftovers are config errors so typos never pass
// silently. Path values resolve against the config file's directory.
class ConfigReader {
 public:
  ConfigReader() = default;

  explicit ConfigReader(const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    try {
      in >> object_;
    } catch (const json::exception& e) {
      throw InvalidParams("config '" + path + "': " + e.what());
    }
    if (!object_.is_object()) throw InvalidParams("config '" + path + "': not a JSON object");
    base_ = fs::path(path).parent_path();
  }

  void number(const char* key, double* out) { fetch<double>(key, out); }
  void integer(const char* key, int* out) { fetch<int>(key, out); }
  void count(const char* key, long long* out) { fetch<long long>(key, out); }
  void seed(const char* key, std::uint64_t* out) { fetch<std::uint64_t>(key, out); }
  void boolean(const char* key, bool* out) { fetch<bool>(key, out); }
  void text(const char* key, std::string* out) { fetch<std::string>(key, out); }
  void numbers(const char* key, std::vector<double>* out) { fetch<std::vector<double>>(key, out); }
  void integers(const char* key, std::vector<int>* out) { fetch<std::vector<int>>(key, out); }

  void file(const char* key, std::string* out) {
    std::string value;
    bool had = false;
    if (object_.contains(key)) had = true;
    fetch<std::string>(key, &value);
    if (!had) return;
    if (value.empty() || fs::path(value).is_absolute() || base_.empty()) {
      *out = value;
    } else {
      *out = (base_ / value).string();
    }
  }

  void finish(const char* command) const {
    for (const auto& item : object_.items()) {
      if (!consumed_.count(item.key())) {
        throw InvalidParams(std::string(command) + " config: unknown key '" + item.key() + "'");
      }
    }
  }

 private:
  template <typename T>
  void fetch(const char* key, T* out) {
    consumed_.insert(key);
    if (!object_.contains(key)) return;
    try {
      *out = object_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InvalidParams(std::string("config key '") + key + "': wrong type");
    }
  }

  json object_ = json::object();
  fs::path base_;
  std::set<std::string> consumed_;
};

// First --config value in argv, found before CLI11 runs so the config can
// seed the option defaults that flags then override.
std::string scan_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return "";
}

// ---------------------------------------------------------------------------
// Shared pieces

void require_path(const std::string& value, const char* command, const char* key) {
  if (value.empty()) {
    throw InvalidParams(std::string(command) + ": '" + key + "' is required");
  }
}

PoseCorpus load_corpus_checked(const RobotModel& robot, const std::string& path) {
  CorpusFile file = read_corpus(path);
  if (file.robot_name != robot.name) {
    throw RobotMismatch("corpus '" + path + "' is for robot '" + file.robot_name +
                        "', not '" + robot.name + "'");
  }
  return build_corpus(robot, file.poses);
}

std::ofstream open_report(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void close_report(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out.good()) throw IoError("write failed for '" + path + "'");
}

int resolve_workers(int workers) {
  if (workers > 0) return workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

double median_of(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// ---------------------------------------------------------------------------
// gen-corpus

struct GenCorpusCfg {
  std::string config;
  std::string robot;
  std::string out;
  int latent_dim = 4;
  long long count = 20000;
  std::uint64_t seed = 0;
  bool filter = false;
  int filter_folds = 5;
  double filter_quantile = 0.99;
};

void load(GenCorpusCfg& cfg) {
  ConfigReader r(cfg.config);
  r.file("robot", &cfg.robot);
  r.file("out", &cfg.out);
  r.integer("latent_dim", &cfg.latent_dim);
  r.count("count", &cfg.count);
  r.seed("seed", &cfg.seed);
  r.boolean("filter", &cfg.filter);
  r.integer("filter_folds", &cfg.filter_folds);
  r.number("filter_quantile", &cfg.filter_quantile);
  r.finish("gen-corpus");
}

int run_gen_corpus(const GenCorpusCfg& cfg) {
  require_path(cfg.robot, "gen-corpus", "robot");
  require_path(cfg.out, "gen-corpus", "out");
  const RobotModel robot = load_robot(cfg.robot);

  RowMatrixXd poses = generate_synthetic_corpus(robot, cfg.latent_dim,
                                                static_cast<Eigen::Index>(cfg.count), cfg.seed);
  if (cfg.filter) {
    FilterResult fr = filter_positives(poses, cfg.filter_folds, cfg.filter_quantile, cfg.seed);
    std::printf("gen-corpus: filter kept %lld of %lld rows (threshold %.6g)\n",
                static_cast<long long>(fr.kept.rows()), static_cast<long long>(poses.rows()),
                fr.threshold);
    poses = std::move(fr.kept);
  }
  const PoseCorpus corpus = build_corpus(robot, poses);  // limit validation
  write_corpus(cfg.out, robot.name, corpus.poses());
  std::printf("gen-corpus: wrote %lld poses (%d joints, robot %s) -> %s\n",
              static_cast<long long>(corpus.size()), robot.n_joints(), robot.name.c_str(),
              cfg.out.c_str());
  std::printf("gen-corpus: all rows within joint limits\n");
  return kOk;
}

// ---------------------------------------------------------------------------
// label

struct LabelCfg {
  std::string config;
  std::string robot;
  std::string corpus;
  std::string out;
  long long total = 200000;
  double on = 0.2;
  double near = 0.5;
  double interp = 0.3;
  std::vector<double> sigmas = {0.05, 0.1, 0.25, 0.5};
  std::uint64_t seed = 0;
  int workers = 1;
  bool audit = false;
  double audit_fraction = 0.01;
};

void load(LabelCfg& cfg) {
  ConfigReader r(cfg.config);
  r.file("robot", &cfg.robot);
  r.file("corpus", &cfg.corpus);
  r.file("out", &cfg.out);
  r.count("total", &cfg.total);
  r.number("on", &cfg.on);
  r.number("near", &cfg.near);
  r.number("interp", &cfg.interp);
  r.numbers("sigmas", &cfg.sigmas);
  r.seed("seed", &cfg.seed);
  r.integer("workers", &cfg.workers);
  r.boolean("audit", &cfg.audit);
  r.number("audit_fraction", &cfg.audit_fraction);
  r.finish("label");
}

int run_label(const LabelCfg& cfg) {
  require_path(cfg.robot, "label", "robot");
  require_path(cfg.corpus, "label", "corpus");
  require_path(cfg.out, "label", "out");
  const RobotModel robot = load_robot(cfg.robot);
  const PoseCorpus corpus = load_corpus_checked(robot, cfg.corpus);

  MixConfig mix;
  mix.on = cfg.on;
  mix.near = cfg.near;
  mix.interp = cfg.interp;
  mix.sigmas = cfg.sigmas;
  const auto samples = build_training_set(robot, corpus, static_cast<Eigen::Index>(cfg.total),
                                          mix, cfg.seed, resolve_workers(cfg.workers));

  long long counts[3] = {0, 0, 0};
  double label_sum = 0.0, label_max = 0.0;
  for (const auto& s : samples) {
    ++counts[static_cast<int>(s.source)];
    label_sum += s.label;
    label_max = std::max(label_max, s.label);
  }
  write_dataset(cfg.out, robot.name, robot.n_joints(), samples);
  std::printf("label: wrote %zu samples -> %s\n", samples.size(), cfg.out.c_str());
  std::printf("label: counts on=%lld near=%lld interp=%lld\n", counts[0], counts[1], counts[2]);
  std::printf("label: label mean %.6g rad, max %.6g rad\n",
              label_sum / static_cast<double>(samples.size()), label_max);

  if (cfg.audit) {
    const Eigen::Index bad = audit_labels(corpus, samples, cfg.audit_fraction, cfg.seed);
    std::printf("label: audit of %.3g%% of labels -> %lld mismatches\n",
                100.0 * cfg.audit_fraction, static_cast<long long>(bad));
    if (bad > 0) return kNumericalError;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainCfg {
  std::string config;
  std::string robot;
  std::string dataset;
  std::string out;
  std::string history;  // defaults to "<out>.history.csv"
  int latent_dim = 16;
  std::vector<int> encoder_hidden = {32};
  std::vector<int> head_hidden = {256, 128};
  double learning_rate = 1e-3;
  int batch_size = 1024;
  int epochs = 30;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

void load(TrainCfg& cfg) {
  ConfigReader r(cfg.config);
  r.file("robot", &cfg.robot);
  r.file("dataset", &cfg.dataset);
  r.file("out", &cfg.out);
  r.file("history", &cfg.history);
  r.integer("latent_dim", &cfg.latent_dim);
  r.integers("encoder_hidden", &cfg.encoder_hidden);
  r.integers("head_hidden", &cfg.head_hidden);
  r.number("learning_rate", &cfg.learning_rate);
  r.integer("batch_size", &cfg.batch_size);
  r.integer("epochs", &cfg.epochs);
  r.number("validation_fraction", &cfg.validation_fraction);
  r.seed("seed", &cfg.seed);
  r.seed("init_seed", &cfg.init_seed);
  r.number("beta1", &cfg.beta1);
  r.number("beta2", &cfg.beta2);
  r.number("adam_eps", &cfg.adam_eps);
  r.finish("train");
}

int run_train(const TrainCfg& cfg) {
  require_path(cfg.robot, "train", "robot");
  require_path(cfg.dataset, "train", "dataset");
  require_path(cfg.out, "train", "out");
  const RobotModel robot = load_robot(cfg.robot);
  DatasetFile data = read_dataset(cfg.dataset);
  if (data.robot_name != robot.name) {
    throw RobotMismatch("dataset '" + cfg.dataset + "' is for robot '" + data.robot_name +
                        "', not '" + robot.name + "'");
  }
  if (data.n_joints != robot.n_joints()) {
    throw DimensionMismatch("dataset joint count does not match the robot");
  }

  FieldArchitecture arch;
  arch.latent_dim = cfg.latent_dim;
  arch.encoder_hidden = cfg.encoder_hidden;
  arch.head_hidden = cfg.head_hidden;
  FieldModel model = init_field(robot, arch, cfg.init_seed);

  TrainConfig tc;
  tc.learning_rate = cfg.learning_rate;
  tc.batch_size = cfg.batch_size;
  tc.epochs = cfg.epochs;
  tc.validation_fraction = cfg.validation_fraction;
  tc.seed = cfg.seed;
  tc.beta1 = cfg.beta1;
  tc.beta2 = cfg.beta2;
  tc.adam_eps = cfg.adam_eps;
  const auto history = train_field(model, data.samples, tc);

  const std::string history_path = cfg.history.empty() ? cfg.out + ".history.csv" : cfg.history;
  std::ofstream csv = open_report(history_path);
  csv << "epoch,train_mae,val_mae\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    csv << (e + 1) << ',' << format_double(history[e].train_mae) << ','
        << format_double(history[e].val_mae) << '\n';
  }
  close_report(csv, history_path);
  save_checkpoint(model, cfg.out);

  std::printf("train: %zu samples, %d epochs -> %s\n", data.samples.size(), cfg.epochs,
              cfg.out.c_str());
  if (!history.empty()) {
    std::printf("train: final train_mae %.6g, val_mae %.6g (history -> %s)\n",
                history.back().train_mae, history.back().val_mae, history_path.c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCfg {
  std::string config;
  std::string robot;
  std::string corpus;
  std::string checkpoint;
  std::string out;
  long long queries = 20000;
  std::uint64_t seed = 1;  // keep distinct from the labeling seed
  double max_oracle_distance = 2.0;
  double on = 0.2;
  double near = 0.5;
  double interp = 0.3;
  std::vector<double> sigmas = {0.05, 0.1, 0.25, 0.5};
  int workers = 1;
};

void load(EvalCfg& cfg) {
  ConfigReader r(cfg.config);
  r.file("robot", &cfg.robot);
  r.file("corpus", &cfg.corpus);
  r.file("checkpoint", &cfg.checkpoint);
  r.file("out", &cfg.out);
  r.count("queries", &cfg.queries);
  r.seed("seed", &cfg.seed);
  r.number("max_oracle_distance", &cfg.max_oracle_distance);
  r.number("on", &cfg.on);
  r.number("near", &cfg.near);
  r.number("interp", &cfg.interp);
  r.numbers("sigmas", &cfg.sigmas);
  r.integer("workers", &cfg.workers);
  r.finish("eval");
}

int run_eval(const EvalCfg& cfg) {
  require_path(cfg.robot, "eval", "robot");
  require_path(cfg.corpus, "eval", "corpus");
  require_path(cfg.checkpoint, "eval", "checkpoint");
  const RobotModel robot = load_robot(cfg.robot);
  const PoseCorpus corpus = load_corpus_checked(robot, cfg.corpus);
  const FieldModel model = load_checkpoint(cfg.checkpoint);
  check_robot(model, robot);

  // Fresh seeded queries from the same sampler as training data; the eval
  // seed keeps them disjoint from any dataset built with a different seed.
  MixConfig mix;
  mix.on = cfg.on;
  mix.near = cfg.near;
  mix.interp = cfg.interp;
  mix.sigmas = cfg.sigmas;
  const auto queries = build_training_set(robot, corpus, static_cast<Eigen::Index>(cfg.queries),
                                          mix, cfg.seed, resolve_workers(cfg.workers));

  const Eigen::Index n = static_cast<Eigen::Index>(queries.size());
  Eigen::MatrixXd cols(robot.n_joints(), n);
  for (Eigen::Index i = 0; i < n; ++i) cols.col(i) = queries[static_cast<std::size_t>(i)].q;
  const Eigen::VectorXd pred = field_forward_batch(model, cols);

  // Headline metrics on queries whose true distance is within the band cap.
  double se = 0.0, sp = 0.0, sl = 0.0, spp = 0.0, sll = 0.0, spl = 0.0;
  long long m = 0;
  double on_sum = 0.0;
  long long on_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = queries[static_cast<std::size_t>(i)];
    if (s.source == SampleSource::kOnManifold) {
      on_sum += pred[i];
      ++on_count;
    }
    if (s.label > cfg.max_oracle_distance) continue;
    ++m;
    se += std::abs(pred[i] - s.label);
    sp += pred[i];
    sl += s.label;
    spp += pred[i] * pred[i];
    sll += s.label * s.label;
    spl += pred[i] * s.label;
  }
  const double mae = m > 0 ? se / static_cast<double>(m) : std::numeric_limits<double>::quiet_NaN();
  double pearson = std::numeric_limits<double>::quiet_NaN();
  if (m > 1) {
    const double inv = 1.0 / static_cast<double>(m);
    const double cov = spl * inv - (sp * inv) * (sl * inv);
    const double vp = spp * inv - (sp * inv) * (sp * inv);
    const double vl = sll * inv - (sl * inv) * (sl * inv);
    if (vp > 0.0 && vl > 0.0) pearson = cov / std::sqrt(vp * vl);
  }
  const double on_mean =
      on_count > 0 ? on_sum / static_cast<double>(on_count) : std::numeric_limits<double>::quiet_NaN();

  // Errors bucketed by true distance.
  const double edges[] = {0.0, 0.1, 0.25, 0.5, 1.0, 2.0,
                          std::numeric_limits<double>::infinity()};
  constexpr int kBands = 6;
  double band_err[kBands] = {};
  long long band_count[kBands] = {};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double label = queries[static_cast<std::size_t>(i)].label;
    for (int b = 0; b < kBands; ++b) {
      if (label >= edges[b] && label < edges[b + 1]) {
        band_err[b] += std::abs(pred[i] - label);
        ++band_count[b];
        break;
      }
    }
  }

  std::printf("eval: %lld queries, %lld within %.3g rad of the corpus\n",
              static_cast<long long>(n), m, cfg.max_oracle_distance);
  std::printf("eval: held-out mae %.6g rad, pearson %.6g\n", mae, pearson);
  std::printf("eval: mean prediction on held-out corpus rows %.6g rad (%lld rows)\n", on_mean,
              on_count);
  for (int b = 0; b < kBands; ++b) {
    const double bmae = band_count[b] > 0 ? band_err[b] / static_cast<double>(band_count[b])
                                          : std::numeric_limits<double>::quiet_NaN();
    std::printf("eval: band [%.3g, %.3g) n=%lld mae %.6g\n", edges[b], edges[b + 1],
                band_count[b], bmae);
  }

  if (!cfg.out.empty()) {
    std::ofstream csv = open_report(cfg.out);
    csv << "key,value\n";
    csv << "n_queries," << n << '\n';
    csv << "headline_count," << m << '\n';
    csv << "headline_mae," << format_double(mae) << '\n';
    csv << "headline_pearson," << format_double(pearson) << '\n';
    csv << "on_manifold_count," << on_count << '\n';
    csv << "on_manifold_mean_prediction," << format_double(on_mean) << '\n';
    for (int b = 0; b < kBands; ++b) {
      const double bmae = band_count[b] > 0 ? band_err[b] / static_cast<double>(band_count[b])
                                            : std::numeric_limits<double>::quiet_NaN();
      csv << "band_count[" << format_double(edges[b]) << ',' << format_double(edges[b + 1])
          << ")," << band_count[b] << '\n';
      csv << "band_mae[" << format_double(edges[b]) << ',' << format_double(edges[b + 1]) << "),"
          << format_double(bmae) << '\n';
    }
    close_report(csv, cfg.out);
    std::printf("eval: report -> %s\n", cfg.out.c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// score

struct ScoreCfg {
  std::string config;
  std::string robot;
  std::string checkpoint;
  std::string corpus;
  std::string poses;
  std::string reference;  // calibrates d_good when given
  std::string out;
  double d_good = 0.0;
  double d_bad = 0.4;
  double reward_scale = 1.0;
};

void load(ScoreCfg& cfg) {
  ConfigReader r(cfg.config);
  r.file("robot", &cfg.robot);
  r.file("checkpoint", &cfg.checkpoint);
  r.file("corpus", &cfg.corpus);
  r.file("poses", &cfg.poses);
  r.file("reference", &cfg.reference);
  r.file("out", &cfg.out);
  r.number("d_good", &cfg.d_good);
  r.number("d_bad", &cfg.d_bad);
  r.number("reward_scale", &cfg.reward_scale);
  r.finish("score");
}

// Field selection shared by score/denoise/ik: the learned field when a
// checkpoint is given, otherwise the exact corpus oracle.
struct FieldChoice {
  FieldModel model;
  PoseCorpus corpus;
  OracleField oracle{corpus};
  bool learned = false;
  bool has_corpus = false;

  const PoseField& field() const { return learned ? static_cast<const PoseField&>(model) : oracle; }
};

FieldChoice choose_field(const RobotModel& robot, const std::string& checkpoint,
                         const std::string& corpus_path, const char* command) {
  FieldChoice choice;
  if (!corpus_path.empty()) {
    choice.corpus = load_corpus_checked(robot, corpus_path);
    choice.has_corpus = true;
  }
  if (!checkpoint.empty()) {
    choice.model = load_checkpoint(checkpoint);
    check_robot(choice.model, robot);
    choice.learned = true;
  }
  if (!choice.learned && !choice.has_corpus) {
    throw InvalidParams(std::string(command) + ": need 'checkpoint' or 'corpus'");
  }
  return choice;
}

int run_score(const ScoreCfg& cfg) {
  require_path(cfg.robot, "score", "robot");
  require_path(cfg.poses, "score", "poses");
  const RobotModel robot = load_robot(cfg.robot);
  const FieldChoice choice = choose_field(robot, cfg.checkpoint, cfg.corpus, "score");
  const PoseField& field = choice.field();

  const RowMatrixXd poses = read_pose_lines(cfg.poses);
  if (poses.cols() != robot.n_joints()) {
    throw DimensionMismatch("score: pose width does not match the robot");
  }

  ScoreParams params;
  params.d_good = cfg.d_good;
  params.d_bad = cfg.d_bad;
  params.reward_scale = cfg.reward_scale;
  if (!cfg.reference.empty()) {
    const RowMatrixXd ref = read_pose_lines(cfg.reference);
    if (ref.cols() != robot.n_joints()) {
      throw DimensionMismatch("score: reference pose width does not match the robot");
    }
    std::vector<Eigen::VectorXd> ref_rows;
    ref_rows.reserve(static_cast<std::size_t>(ref.rows()));
    for (Eigen::Index i = 0; i < ref.rows(); ++i) ref_rows.push_back(ref.row(i).transpose());
    params.d_good = compute_d_good(field, ref_rows);
    std::printf("score: calibrated d_good %.6g from %lld reference poses\n", params.d_good,
                static_cast<long long>(ref.rows()));
  }

  std::string table = "index,field_value,score,reward\n";
  for (Eigen::Index i = 0; i < poses.rows(); ++i) {
    const double f = field.value(poses.row(i).transpose());
    const double s = pose_score(f, params);
    const double r = pose_prior_reward(s, params.reward_scale);
    table += std::to_string(i) + ',' + format_double(f) + ',' + format_double(s) + ',' +
             format_double(r) + '\n';
  }
  if (cfg.out.empty()) {
    std::fputs(table.c_str(), stdout);
  } else {
    std::ofstream csv = open_report(cfg.out);
    csv << table;
    close_report(csv, cfg.out);
    std::printf("score: %lld poses -> %s\n", static_cast<long long>(poses.rows()),
                cfg.out.c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// denoise

struct DenoiseCfg {
  std::string config;
  std::string robot;
  std::string checkpoint;
  std::string corpus;
  std::string poses;  // starts; random uniform draws when empty
  std::string summary_out;
  std::string traces_out;
  long long count = 100;
  std::uint64_t seed = 0;
  double step_size = 1.0;
  int max_iters = 100;
  double stop_distance = 0.05;
  double grad_floor = 1e-8;
};

void load(DenoiseCfg& cfg) {
  ConfigReader r(cfg.config);
  r.file("robot", &cfg.robot);
  r.file("checkpoint", &cfg.checkpoint);
  r.file("corpus", &cfg.corpus);
  r.file("poses", &cfg.poses);
  r.file("summary_out", &cfg.summary_out);
  r.file("traces_out", &cfg.traces_out);
  r.count("count", &cfg.count);
  r.seed("seed", &cfg.seed);
  r.number("step_size", &cfg.step_size);
  r.integer("max_iters", &cfg.max_iters);
  r.number("stop_distance", &cfg.stop_distance);
  r.number("grad_floor", &cfg.grad_floor);
  r.finish("denoise");
}

const char* status_name(ProjectionStatus s) {
  switch (s) {
    case ProjectionStatus::kConverged: return "converged";
    case ProjectionStatus::kMaxIters: return "max_iters";
    case ProjectionStatus::kGradientVanished: return "gradient_vanished";
  }
  return "unknown";
}

int run_denoise(const DenoiseCfg& cfg) {
  require_path(cfg.robot, "denoise", "robot");
  const RobotModel robot = load_robot(cfg.robot);
  const FieldChoice choice = choose_field(robot, cfg.checkpoint, cfg.corpus, "denoise");
  const PoseField& field = choice.field();

  std::vector<Eigen::VectorXd> starts;
  if (!cfg.poses.empty()) {
    const RowMatrixXd rows = read_pose_lines(cfg.poses);
    if (rows.cols() != robot.n_joints()) {
      throw DimensionMismatch("denoise: pose width does not match the robot");
    }
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
      starts.push_back(clamp_to_limits(robot, rows.row(i).transpose()));
    }
  } else {
    if (cfg.count < 1) throw InvalidParams("denoise: count must be >= 1");
    for (long long i = 0; i < cfg.count; ++i) {
      std::mt19937_64 eng = make_engine(cfg.seed, kTagDenoiseStart,
                                        static_cast<std::uint64_t>(i));
      Eigen::VectorXd q(robot.n_joints());
      for (int j = 0; j < robot.n_joints(); ++j) {
        const Joint& joint = robot.joints[static_cast<std::size_t>(j)];
        q[j] = uniform(eng, joint.lo, joint.hi);
      }
      starts.push_back(std::move(q));
    }
  }

  ProjectionConfig pc;
  pc.step_size = cfg.step_size;
  pc.max_iters = cfg.max_iters;
  pc.stop_distance = cfg.stop_distance;
  pc.grad_floor = cfg.grad_floor;
  const auto traces = denoise_batch(robot, field, starts, pc);

  std::vector<double> field_reduction, oracle_reduction;
  long long improved = 0;
  std::string summary = choice.has_corpus
                            ? "start,status,steps,initial_field,final_field,initial_oracle,"
                              "final_oracle\n"
                            : "start,status,steps,initial_field,final_field\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const ProjectionTrace& t = traces[i];
    const double f0 = t.field_values.front();
    const double f1 = t.final_value();
    if (f1 <= f0) ++improved;
    if (f0 > 0.0) field_reduction.push_back(1.0 - f1 / f0);
    summary += std::to_string(i) + ',' + status_name(t.status) + ',' +
               std::to_string(t.iterates.size() - 1) + ',' + format_double(f0) + ',' +
               format_double(f1);
    if (choice.has_corpus) {
      const double d0 = nearest_distance(choice.corpus, t.iterates.front()).distance;
      const double d1 = nearest_distance(choice.corpus, t.final_pose()).distance;
      if (d0 > 0.0) oracle_reduction.push_back(1.0 - d1 / d0);
      summary += ',' + format_double(d0) + ',' + format_double(d1);
    }
    summary += '\n';
  }

  std::printf("denoise: %zu starts, %lld with final field value <= initial\n", traces.size(),
              improved);
  std::printf("denoise: median field-value reduction %.4g%%\n",
              100.0 * median_of(field_reduction));
  if (choice.has_corpus) {
    std::printf("denoise: median oracle-distance reduction %.4g%%\n",
                100.0 * median_of(oracle_reduction));
  }

  if (!cfg.summary_out.empty()) {
    std::ofstream csv = open_report(cfg.summary_out);
    csv << summary;
    close_report(csv, cfg.summary_out);
    std::printf("denoise: summary -> %s\n", cfg.summary_out.c_str());
  }
  if (!cfg.traces_out.empty()) {
    std::ofstream csv = open_report(cfg.traces_out);
    csv << "start,step,field_value\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
      for (std::size_t k = 0; k < traces[i].field_values.size(); ++k) {
        csv << i << ',' << k << ',' << format_double(traces[i].field_values[k]) << '\n';
      }
    }
    close_report(csv, cfg.traces_out);
    std::printf("denoise: traces -> %s\n", cfg.traces_out.c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// ik / retarget

struct IkCfg {
  std::string config;
  std::string robot;
  std::string targets;
  std::string checkpoint;
  std::string corpus;
  std::string q0;  // optional single-row pose file
  std::string out;
  std::string report_out;
  double w_task = 1.0;
  double lambda_smooth = 1e-2;
  double lambda_prior = 1e-1;
  double damping = 1e-6;
  double max_step = 0.2;
  int iters = 100;
};

void load(IkCfg& cfg, const char* command) {
  ConfigReader r(cfg.config);
  r.file("robot", &cfg.robot);
  r.file("targets", &cfg.targets);
  r.file("checkpoint", &cfg.checkpoint);
  r.file("corpus", &cfg.corpus);
  r.file("q0", &cfg.q0);
  r.file("out", &cfg.out);
  r.file("report_out", &cfg.report_out);
  r.number("w_task", &cfg.w_task);
  r.number("lambda_smooth", &cfg.lambda_smooth);
  r.number("lambda_prior", &cfg.lambda_prior);
  r.number("damping", &cfg.damping);
  r.number("max_step", &cfg.max_step);
  r.integer("iters", &cfg.iters);
  r.finish(command);
}

// Shared setup for ik and retarget; `warm_start` chains frames, otherwise
// every frame solves from the same start.
int run_ik_like(const IkCfg& cfg, bool warm_start, const char* command) {
  require_path(cfg.robot, command, "robot");
  require_path(cfg.targets, command, "targets");
  require_path(cfg.out, command, "out");
  const RobotModel robot = load_robot(cfg.robot);
  const FieldChoice choice = choose_field(robot, cfg.checkpoint, cfg.corpus, command);
  const PoseField& field = choice.field();
  const auto scripts = read_keypoint_targets(cfg.targets, robot);

  std::optional<Eigen::VectorXd> q0;
  if (!cfg.q0.empty()) {
    const RowMatrixXd rows = read_pose_lines(cfg.q0);
    if (rows.cols() != robot.n_joints()) {
      throw DimensionMismatch(std::string(command) + ": q0 width does not match the robot");
    }
    q0 = clamp_to_limits(robot, rows.row(0).transpose());
  }

  IkWeights weights;
  weights.w_task = cfg.w_task;
  weights.lambda_smooth = cfg.lambda_smooth;
  weights.lambda_prior = cfg.lambda_prior;
  weights.damping = cfg.damping;
  weights.max_step = cfg.max_step;

  RetargetResult result;
  if (warm_start) {
    result = retarget_trajectory(robot, field, scripts, weights, cfg.iters,
                                 q0 ? &*q0 : nullptr);
  } else {
    const Eigen::VectorXd start =
        q0 ? *q0 : clamp_to_limits(robot, Eigen::VectorXd::Zero(robot.n_joints()));
    result.configurations.resize(static_cast<Eigen::Index>(scripts.size()), robot.n_joints());
    result.reports.reserve(scripts.size());
    for (std::size_t f = 0; f < scripts.size(); ++f) {
      auto [q, report] = solve_frame(robot, field, start, scripts[f], weights, cfg.iters);
      result.configurations.row(static_cast<Eigen::Index>(f)) = q.transpose();
      result.reports.push_back(report);
    }
  }

  Trajectory traj(scripts.size());
  for (std::size_t f = 0; f < scripts.size(); ++f) {
    traj[f].q = result.configurations.row(static_cast<Eigen::Index>(f)).transpose();
  }
  write_trajectory(cfg.out, traj);

  double worst = 0.0, sum = 0.0;
  for (const auto& r : result.reports) {
    worst = std::max(worst, r.task_residual_norm);
    sum += r.task_residual_norm;
  }
  std::printf("%s: %zu frames -> %s\n", command, scripts.size(), cfg.out.c_str());
  std::printf("%s: task residual mean %.6g, worst %.6g\n", command,
              sum / static_cast<double>(result.reports.size()), worst);

  if (!cfg.report_out.empty()) {
    std::ofstream csv = open_report(cfg.report_out);
    csv << "frame,task_residual_norm,prior_value,iterations\n";
    for (std::size_t f = 0; f < result.reports.size(); ++f) {
      const FrameReport& r = result.reports[f];
      csv << f << ',' << format_double(r.task_residual_norm) << ','
          << format_double(r.prior_value) << ',' << r.iterations << '\n';
    }
    close_report(csv, cfg.report_out);
    std::printf("%s: report -> %s\n", command, cfg.report_out.c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseCfg {
  std::string config;
  std::string out;
  int dims = 29;
  double sigma = 0.1;
  long long n = 100000;
  std::uint64_t seed = 0;
};

void load(DiagnoseCfg& cfg) {
  ConfigReader r(cfg.config);
  r.file("out", &cfg.out);
  r.integer("dims", &cfg.dims);
  r.number("sigma", &cfg.sigma);
  r.count("n", &cfg.n);
  r.seed("seed", &cfg.seed);
  r.finish("diagnose");
}

int run_diagnose(const DiagnoseCfg& cfg) {
  const ShellDiagnostic d = gaussian_shell_diagnostic(cfg.dims, cfg.sigma,
                                                      static_cast<Eigen::Index>(cfg.n), cfg.seed);
  const double expected_mean_sq = static_cast<double>(cfg.dims) * cfg.sigma * cfg.sigma;
  const double expected_cv = std::sqrt(M_PI / 2.0 - 1.0);
  const double ratio = d.cv_decoupled / d.cv_naive_norm;

  std::printf("diagnose: dims %d, sigma %.6g, %lld draws\n", cfg.dims, cfg.sigma, cfg.n);
  std::printf("diagnose: mean squared norm %.6g (dims * sigma^2 = %.6g)\n", d.mean_sq_norm,
              expected_mean_sq);
  std::printf("diagnose: naive norm cv %.6g  (shell concentration)\n", d.cv_naive_norm);
  std::printf("diagnose: decoupled magnitude cv %.6g  (theory %.6g)\n", d.cv_decoupled,
              expected_cv);
  std::printf("diagnose: cv ratio %.6g\n", ratio);

  if (!cfg.out.empty()) {
    std::ofstream csv = open_report(cfg.out);
    csv << "key,value\n";
    csv << "dims," << cfg.dims << '\n';
    csv << "sigma," << format_double(cfg.sigma) << '\n';
    csv << "n," << cfg.n << '\n';
    csv << "mean_sq_norm," << format_double(d.mean_sq_norm) << '\n';
    csv << "expected_mean_sq_norm," << format_double(expected_mean_sq) << '\n';
    csv << "cv_naive_norm," << format_double(d.cv_naive_norm) << '\n';
    csv << "cv_decoupled," << format_double(d.cv_decoupled) << '\n';
    csv << "cv_ratio," << format_double(ratio) << '\n';
    close_report(csv, cfg.out);
    std::printf("diagnose: report -> %s\n", cfg.out.c_str());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// repro

struct ReproCfg {
  std::string config_dir;  // default: $POSEFIELD_CONFIG_DIR, else configs/repro
  std::string out_dir = "repro_out";
};

// Chains the pipeline from the checked-in step configs. Science knobs come
// from <config_dir>/<step>.json; the artifact paths that wire the steps
// together are pinned here under out_dir, so two runs against the same
// config directory write byte-identical files.
int run_repro(const ReproCfg& cfg) {
  std::string dir = cfg.config_dir;
  if (dir.empty()) {
    const char* env = std::getenv("POSEFIELD_CONFIG_DIR");
    dir = (env && *env) ? env : "configs/repro";
  }
  const auto step_config = [&dir](const char* step) {
    const fs::path p = fs::path(dir) / (std::string(step) + ".json");
    if (!fs::exists(p)) throw IoError("repro: missing step config '" + p.string() + "'");
    return p.string();
  };
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("repro: cannot create '" + cfg.out_dir + "'");
  const auto artifact = [&](const char* name) { return (fs::path(cfg.out_dir) / name).string(); };

  std::printf("[repro] gen-corpus\n");
  GenCorpusCfg gen;
  gen.config = step_config("gen-corpus");
  load(gen);
  gen.out = artifact("corpus.pdfc");
  if (const int rc = run_gen_corpus(gen); rc != kOk) return rc;

  std::printf("[repro] label\n");
  LabelCfg label;
  label.config = step_config("label");
  load(label);
  label.corpus = artifact("corpus.pdfc");
  label.out = artifact("dataset.pdfl");
  if (const int rc = run_label(label); rc != kOk) return rc;

  std::printf("[repro] train\n");
  TrainCfg train;
  train.config = step_config("train");
  load(train);
  train.dataset = artifact("dataset.pdfl");
  train.out = artifact("checkpoint.json");
  train.history = artifact("train_history.csv");
  if (const int rc = run_train(train); rc != kOk) return rc;

  std::printf("[repro] eval\n");
  EvalCfg eval;
  eval.config = step_config("eval");
  load(eval);
  eval.corpus = artifact("corpus.pdfc");
  eval.checkpoint = artifact("checkpoint.json");
  eval.out = artifact("eval_report.csv");
  if (const int rc = run_eval(eval); rc != kOk) return rc;

  std::printf("[repro] denoise\n");
  DenoiseCfg denoise;
  denoise.config = step_config("denoise");
  load(denoise);
  denoise.corpus = artifact("corpus.pdfc");
  denoise.checkpoint = artifact("checkpoint.json");
  denoise.poses.clear();
  denoise.summary_out = artifact("denoise_summary.csv");
  denoise.traces_out = artifact("denoise_traces.csv");
  if (const int rc = run_denoise(denoise); rc != kOk) return rc;

  std::printf("[repro] done -> %s\n", cfg.out_dir.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pose-distance-field toolkit"};
  app.require_subcommand(1);

  GenCorpusCfg gen;
  LabelCfg label;
  TrainCfg train;
  EvalCfg eval;
  ScoreCfg score;
  DenoiseCfg denoise;
  IkCfg ik;
  IkCfg retarget;
  DiagnoseCfg diag;
  ReproCfg repro;

  auto* gen_cmd = app.add_subcommand("gen-corpus", "generate a synthetic pose corpus");
  gen_cmd->add_option("--config", gen.config, "JSON config; flags override its keys");
  gen_cmd->add_option("--robot", gen.robot, "robot description file");
  gen_cmd->add_option("--out", gen.out, "corpus output path");
  gen_cmd->add_option("--latent_dim", gen.latent_dim, "latent dimension of the pose family");
  gen_cmd->add_option("--count", gen.count, "number of poses");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--filter", gen.filter, "cross-fold outlier rejection (true/false)");
  gen_cmd->add_option("--filter_folds", gen.filter_folds, "folds for the filter");
  gen_cmd->add_option("--filter_quantile", gen.filter_quantile, "distance quantile kept");

  auto* label_cmd = app.add_subcommand("label", "sample and label a training set");
  label_cmd->add_option("--config", label.config, "JSON config; flags override its keys");
  label_cmd->add_option("--robot", label.robot, "robot description file");
  label_cmd->add_option("--corpus", label.corpus, "corpus file");
  label_cmd->add_option("--out", label.out, "dataset output path");
  label_cmd->add_option("--total", label.total, "total sample count");
  label_cmd->add_option("--on", label.on, "on-manifold mix weight");
  label_cmd->add_option("--near", label.near, "near-manifold mix weight");
  label_cmd->add_option("--interp", label.interp, "interpolated mix weight");
  label_cmd->add_option("--sigmas", label.sigmas, "near-manifold sigma schedule")
      ->delimiter(',');
  label_cmd->add_option("--seed", label.seed, "RNG seed");
  label_cmd->add_option("--workers", label.workers, "labeling threads (0 = all cores)");
  label_cmd->add_option("--audit", label.audit, "re-verify a label subsample (true/false)");
  label_cmd->add_option("--audit_fraction", label.audit_fraction, "fraction audited");

  auto* train_cmd = app.add_subcommand("train", "train the distance field");
  train_cmd->add_option("--config", train.config, "JSON config; flags override its keys");
  train_cmd->add_option("--robot", train.robot, "robot description file");
  train_cmd->add_option("--dataset", train.dataset, "labeled dataset file");
  train_cmd->add_option("--out", train.out, "checkpoint output path");
  train_cmd->add_option("--history", train.history,
                        "loss CSV path (default: <out>.history.csv)");
  train_cmd->add_option("--latent_dim", train.latent_dim, "per-joint latent width");
  train_cmd->add_option("--encoder_hidden", train.encoder_hidden, "encoder hidden widths")
      ->delimiter(',');
  train_cmd->add_option("--head_hidden", train.head_hidden, "head hidden widths")
      ->delimiter(',');
  train_cmd->add_option("--learning_rate", train.learning_rate, "Adam learning rate");
  train_cmd->add_option("--batch_size", train.batch_size, "mini-batch size");
  train_cmd->add_option("--epochs", train.epochs, "training epochs");
  train_cmd->add_option("--validation_fraction", train.validation_fraction,
                        "held-out fraction in [0, 0.5]");
  train_cmd->add_option("--seed", train.seed, "shuffle/split seed");
  train_cmd->add_option("--init_seed", train.init_seed, "weight initialization seed");
  train_cmd->add_option("--beta1", train.beta1, "Adam beta1");
  train_cmd->add_option("--beta2", train.beta2, "Adam beta2");
  train_cmd->add_option("--adam_eps", train.adam_eps, "Adam epsilon");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against the oracle");
  eval_cmd->add_option("--config", eval.config, "JSON config; flags override its keys");
  eval_cmd->add_option("--robot", eval.robot, "robot description file");
  eval_cmd->add_option("--corpus", eval.corpus, "corpus file");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "trained checkpoint");
  eval_cmd->add_option("--out", eval.out, "report CSV path");
  eval_cmd->add_option("--queries", eval.queries, "held-out query count");
  eval_cmd->add_option("--seed", eval.seed, "query seed (keep distinct from labeling)");
  eval_cmd->add_option("--max_oracle_distance", eval.max_oracle_distance,
                       "headline metrics cap (rad)");
  eval_cmd->add_option("--on", eval.on, "on-manifold mix weight");
  eval_cmd->add_option("--near", eval.near, "near-manifold mix weight");
  eval_cmd->add_option("--interp", eval.interp, "interpolated mix weight");
  eval_cmd->add_option("--sigmas", eval.sigmas, "near-manifold sigma schedule")->delimiter(',');
  eval_cmd->add_option("--workers", eval.workers, "query threads (0 = all cores)");

  auto* score_cmd = app.add_subcommand("score", "score poses and the derived reward");
  score_cmd->add_option("--config", score.config, "JSON config; flags override its keys");
  score_cmd->add_option("--robot", score.robot, "robot description file");
  score_cmd->add_option("--checkpoint", score.checkpoint, "trained checkpoint");
  score_cmd->add_option("--corpus", score.corpus, "corpus file (exact oracle field)");
  score_cmd->add_option("--poses", score.poses, "pose-lines file to score");
  score_cmd->add_option("--reference", score.reference,
                        "pose-lines file that calibrates d_good");
  score_cmd->add_option("--out", score.out, "CSV output (stdout when omitted)");
  score_cmd->add_option("--d_good", score.d_good, "score-0 distance");
  score_cmd->add_option("--d_bad", score.d_bad, "score-1 distance");
  score_cmd->add_option("--reward_scale", score.reward_scale, "reward exponent scale");

  auto* den_cmd = app.add_subcommand("denoise", "project poses toward the manifold");
  den_cmd->add_option("--config", denoise.config, "JSON config; flags override its keys");
  den_cmd->add_option("--robot", denoise.robot, "robot description file");
  den_cmd->add_option("--checkpoint", denoise.checkpoint, "trained checkpoint");
  den_cmd->add_option("--corpus", denoise.corpus, "corpus file (oracle field / oracle stats)");
  den_cmd->add_option("--poses", denoise.poses, "pose-lines starts (random when omitted)");
  den_cmd->add_option("--summary_out", denoise.summary_out, "per-start summary CSV");
  den_cmd->add_option("--traces_out", denoise.traces_out, "per-step trace CSV");
  den_cmd->add_option("--count", denoise.count, "random start count");
  den_cmd->add_option("--seed", denoise.seed, "random start seed");
  den_cmd->add_option("--step_size", denoise.step_size, "initial step scale");
  den_cmd->add_option("--max_iters", denoise.max_iters, "iteration budget");
  den_cmd->add_option("--stop_distance", denoise.stop_distance, "convergence threshold");
  den_cmd->add_option("--grad_floor", denoise.grad_floor, "gradient-norm floor");

  const auto add_ik_options = [](CLI::App* cmd, IkCfg& cfg) {
    cmd->add_option("--config", cfg.config, "JSON config; flags override its keys");
    cmd->add_option("--robot", cfg.robot, "robot description file");
    cmd->add_option("--targets", cfg.targets, "keypoint target script");
    cmd->add_option("--checkpoint", cfg.checkpoint, "trained checkpoint");
    cmd->add_option("--corpus", cfg.corpus, "corpus file (exact oracle field)");
    cmd->add_option("--q0", cfg.q0, "pose-lines file with the starting configuration");
    cmd->add_option("--out", cfg.out, "output trajectory path");
    cmd->add_option("--report_out", cfg.report_out, "per-frame residual CSV");
    cmd->add_option("--w_task", cfg.w_task, "task residual weight");
    cmd->add_option("--lambda_smooth", cfg.lambda_smooth, "step smoothness weight");
    cmd->add_option("--lambda_prior", cfg.lambda_prior, "pose prior weight");
    cmd->add_option("--damping", cfg.damping, "least-squares damping");
    cmd->add_option("--max_step", cfg.max_step, "per-joint step cap (rad)");
    cmd->add_option("--iters", cfg.iters, "iterations per frame");
  };
  auto* ik_cmd = app.add_subcommand("ik", "solve each frame from the same start");
  add_ik_options(ik_cmd, ik);
  auto* retarget_cmd =
      app.add_subcommand("retarget", "solve frames chained by warm starts");
  add_ik_options(retarget_cmd, retarget);

  auto* diag_cmd = app.add_subcommand("diagnose", "perturbation shell-concentration report");
  diag_cmd->add_option("--config", diag.config, "JSON config; flags override its keys");
  diag_cmd->add_option("--out", diag.out, "report CSV path");
  diag_cmd->add_option("--dims", diag.dims, "dimension");
  diag_cmd->add_option("--sigma", diag.sigma, "perturbation scale");
  diag_cmd->add_option("--n", diag.n, "Monte Carlo draws");
  diag_cmd->add_option("--seed", diag.seed, "RNG seed");

  auto* repro_cmd =
      app.add_subcommand("repro", "chain gen-corpus/label/train/eval/denoise from configs");
  repro_cmd->add_option("--config_dir", repro.config_dir,
                        "step config directory (default: $POSEFIELD_CONFIG_DIR or configs/repro)");
  repro_cmd->add_option("--out_dir", repro.out_dir, "artifact output directory");

  try {
    // Config files seed the defaults before flags are parsed, so any flag
    // present on the command line wins.
    const std::string config_path = scan_config_path(argc, argv);
    if (!config_path.empty() && argc > 1) {
      const std::string cmd = argv[1];
      if (cmd == "gen-corpus") { gen.config = config_path; load(gen); }
      else if (cmd == "label") { label.config = config_path; load(label); }
      else if (cmd == "train") { train.config = config_path; load(train); }
      else if (cmd == "eval") { eval.config = config_path; load(eval); }
      else if (cmd == "score") { score.config = config_path; load(score); }
      else if (cmd == "denoise") { denoise.config = config_path; load(denoise); }
      else if (cmd == "ik") { ik.config = config_path; load(ik, "ik"); }
      else if (cmd == "retarget") { retarget.config = config_path; load(retarget, "retarget"); }
      else if (cmd == "diagnose") { diag.config = config_path; load(diag); }
    }

    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);  // prints help, exits 0
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return kConfigError;
    }

    if (gen_cmd->parsed()) return run_gen_corpus(gen);
    if (label_cmd->parsed()) return run_label(label);
    if (train_cmd->parsed()) return run_train(train);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (score_cmd->parsed()) return run_score(score);
    if (den_cmd->parsed()) return run_denoise(denoise);
    if (ik_cmd->parsed()) return run_ik_like(ik, false, "ik");
    if (retarget_cmd->parsed()) return run_ik_like(retarget, true, "retarget");
    if (diag_cmd->parsed()) return run_diagnose(diag);
    if (repro_cmd->parsed()) return run_repro(repro);
    return kConfigError;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return classify(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIoError;
  }
}
