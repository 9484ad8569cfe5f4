#include "urbanvis/cli.hpp"

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <thread>

#include <pthread.h>

#include "CLI11.hpp"
#include "urbanvis/dataset.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/features.hpp"
#include "urbanvis/geo.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/labelsvc.hpp"
#include "urbanvis/pipeline.hpp"
#include "urbanvis/svm.hpp"
#include "urbanvis/synth.hpp"

namespace urbanvis {

namespace {

// Invalid flag combinations detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Task task_from(const std::string& name) {
  const auto t = parse_task(name);
  if (!t) throw UsageError("--task must be qualification, quality or continuity");
  return *t;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", v);
  return buf;
}

struct Options {
  // shared
  std::string manifest, labels, features, split, model, out, network, scores, survey, task, predictions;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  // sample
  double interval_m = 200.0;
  bool flip_side = false;
  // codebook / features
  int k = 256;
  std::size_t max_descriptors = 50000;
  int max_iterations = 50;
  std::string codebook, import;
  // split
  std::size_t per_class_dev = 40, per_class_test = 60;
  // train
  double lambda = 1e-4;
  std::vector<double> lambda_grid;
  int epochs = 30;
  std::string normalize = "l2", report;
  // evaluate
  std::string mse_out;
  // screen
  std::string rejected;
  // score
  std::string quality_model, continuity_model;
  // map
  std::vector<double> quality_bins{1, 2, 3, 4}, continuity_bins{0, 0.25, 0.5, 0.75, 1};
  // serve
  std::string listen = "127.0.0.1:8080", ui_dir, port_file;
  std::vector<std::string> models;
  // synth
  std::size_t n_images = 400;
  int width = 128, height = 96;
};

void cmd_sample(const Options& o, std::ostream& out) {
  const auto segments = geo::load_street_network(o.network);
  std::vector<geo::SamplePoint> points;
  for (const auto& seg : segments) {
    auto p = geo::sample_points(seg, {o.interval_m, o.flip_side});
    points.insert(points.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  geo::write_points_csv(o.out, points);
  out << "sampled " << points.size() << " points on " << segments.size() << " segments\n";
}

void cmd_codebook(const Options& o, std::ostream& out) {
  const auto images = read_manifest(o.manifest);
  const RowMatrix sample = pipeline::sample_descriptors(images, o.max_descriptors, o.seed, o.threads);
  KMeansOptions km;
  km.max_iterations = o.max_iterations;
  const Codebook cb = build_codebook(sample, o.k, o.seed, km);
  save_codebook(o.out, cb);
  out << cb.extractor_id << ": " << sample.rows() << " descriptors, " << cb.iterations
      << " iterations, inertia " << io::format_double(cb.inertia) << "\n";
}

void cmd_features(const Options& o, std::ostream& out) {
  FeatureSet set;
  if (!o.import.empty()) {
    if (!o.manifest.empty() || !o.codebook.empty()) throw UsageError("--import excludes --manifest/--codebook");
    set = to_feature_set(import_embeddings(o.import));
  } else {
    if (o.manifest.empty() || o.codebook.empty()) throw UsageError("features needs --manifest and --codebook, or --import");
    set = pipeline::extract_features(read_manifest(o.manifest), load_codebook(o.codebook), o.threads);
  }
  write_features_csv(o.out, set);
  out << set.vectors.size() << " vectors, extractor " << set.extractor_id << ", dimension " << set.dimension() << "\n";
}

void cmd_split(const Options& o, std::ostream& out) {
  const Task task = task_from(o.task);
  const auto labels = resolve_labels(read_labels(o.labels), task);
  const Split s = stratified_split(labels, o.per_class_dev, o.per_class_test, o.seed);
  write_split_csv(o.out, s);
  out << task_name(task) << ": train " << s.train_ids.size() << ", dev " << s.dev_ids.size() << ", test "
      << s.test_ids.size() << "\n";
}

svm::Hyperparams hyper_from(const Options& o) {
  const auto norm = svm::parse_normalization(o.normalize);
  if (!norm) throw UsageError("--normalize must be none, l2 or standardize");
  return {o.lambda, o.epochs, o.seed, *norm};
}

void cmd_train(const Options& o, std::ostream& out) {
  const Task task = task_from(o.task);
  const auto labels = resolve_labels(read_labels(o.labels), task);
  const auto result = pipeline::train_task(task, labels, read_features_csv(o.features), hyper_from(o),
                                           read_split_csv(o.split), o.lambda_grid);
  svm::save_model(result.model, o.out);
  if (!o.report.empty()) io::write_file(o.report, pipeline::train_report_json(task, result));
  out << task_name(task) << ": lambda " << io::format_double(result.model.hyper.lambda) << ", train accuracy "
      << percent(100.0 * result.train.accuracy);
  if (result.dev) out << ", dev accuracy " << percent(100.0 * result.dev->accuracy);
  if (result.test) out << ", test accuracy " << percent(100.0 * result.test->accuracy);
  out << "\n";
}

void cmd_evaluate(const Options& o, std::ostream& out) {
  const svm::SvmModel model = svm::load_model(o.model);
  const auto labels = resolve_labels(read_labels(o.labels), model.task);
  const FeatureSet features = read_features_csv(o.features);
  const Split split = read_split_csv(o.split);
  std::vector<std::pair<std::string, metrics::MetricsReport>> rows;
  std::map<std::string, double> mse;
  const std::pair<const char*, const std::vector<std::string>*> subsets[] = {
      {"train", &split.train_ids}, {"dev", &split.dev_ids}, {"test", &split.test_ids}};
  for (const auto& [name, ids] : subsets) {
    if (ids->empty()) continue;
    auto r = pipeline::evaluate(model, labels, features, *ids);
    if (r.mse) mse[name] = *r.mse;
    rows.emplace_back(std::string(task_name(model.task)) + ' ' + name, std::move(r));
  }
  const std::string table = metrics::classification_table_csv(rows);
  if (o.out.empty()) {
    out << table;
  } else {
    io::write_file(o.out, table);
  }
  if (!o.mse_out.empty()) {
    if (model.task != Task::Quality) throw UsageError("--mse-out applies to quality models");
    auto get = [&](const char* k) { return mse.contains(k) ? mse.at(k) : 0.0; };
    io::write_file(o.mse_out, metrics::mse_table_csv({{model.extractor_id, get("train"), get("dev"), get("test")}}));
  }
}

void cmd_screen(const Options& o, std::ostream& out) {
  const auto images = read_manifest(o.manifest);
  const FeatureSet features = read_features_csv(o.features);
  const svm::SvmModel model = svm::load_model(o.model);
  const auto result = pipeline::screen_qualified(images, model, features, o.threads);
  write_manifest(o.out, result.qualified);
  if (!o.rejected.empty()) write_manifest(o.rejected, result.rejected);
  if (!o.predictions.empty()) {
    std::vector<std::string> ids;
    for (const auto& img : images) ids.push_back(img.image_id);
    io::write_file(o.predictions, pipeline::predictions_csv(pipeline::predict_images(model, ids, features, o.threads)));
  }
  const double n = static_cast<double>(images.size());
  out << "qualified " << result.qualified.size() << ", rejected " << result.rejected.size() << " ("
      << percent(n > 0 ? 100.0 * static_cast<double>(result.rejected.size()) / n : 0.0) << " street images)\n";
}

void cmd_score(const Options& o, std::ostream& out) {
  const auto images = read_manifest(o.manifest);
  std::vector<pipeline::Prediction> predictions;
  const auto scores =
      pipeline::score_segments(images, svm::load_model(o.quality_model), svm::load_model(o.continuity_model),
                               read_features_csv(o.features), o.threads, &predictions);
  pipeline::write_scores_csv(o.out, scores);
  if (!o.predictions.empty()) io::write_file(o.predictions, pipeline::predictions_csv(std::move(predictions)));
  out << "scored " << images.size() << " images on " << scores.size() << " segments\n";
}

void cmd_map(const Options& o, std::ostream& out) {
  const auto scores = pipeline::read_scores_csv(o.scores);
  const auto segments = geo::load_street_network(o.network);
  io::write_file(o.out, geo::export_geojson(scores, segments, {{o.quality_bins}, {o.continuity_bins}}));
  out << "mapped " << scores.size() << " segments\n";
}

void cmd_validate(const Options& o, std::ostream& out) {
  const auto reports =
      pipeline::validate_against_survey(pipeline::read_scores_csv(o.scores), pipeline::read_survey_csv(o.survey));
  const std::string csv = metrics::validation_csv(reports);
  if (o.out.empty()) {
    out << csv;
  } else {
    io::write_file(o.out, csv);
  }
}

void cmd_synth(const Options& o, std::ostream& out) {
  synth::CorpusOptions c;
  c.n_images = o.n_images;
  c.width = o.width;
  c.height = o.height;
  c.seed = o.seed;
  const auto s = synth::generate_corpus(o.out, c);
  out << "wrote " << s.n_images << " images (" << s.n_qualified << " qualified) on " << s.n_segments
      << " segments, " << s.n_labels << " labels\n";
}

void cmd_serve(const Options& o, std::ostream& out) {
  const auto colon = o.listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen must be host:port");
  const std::string host = o.listen.substr(0, colon);
  int port = 0;
  try {
    port = static_cast<int>(io::parse_int(o.listen.substr(colon + 1)));
  } catch (const Error&) {
    throw UsageError("--listen must be host:port");
  }
  if (!o.models.empty() && o.features.empty()) throw UsageError("--model needs --features");

  LabelStore store(o.labels);
  labelsvc::LabelService service(read_manifest(o.manifest), store);
  if (!o.models.empty()) {
    auto features = std::make_shared<const FeatureSet>(read_features_csv(o.features));
    for (const auto& path : o.models) service.set_model(svm::load_model(path), features);
  }
  labelsvc::HttpServer server(service, o.ui_dir);

  // Block the stop signals before the server spawns workers; a helper thread waits for them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  const int bound = server.bind(host, port);
  if (bound < 0) throw Error(Errc::StorageFailure, "cannot listen on " + o.listen);
  if (!o.port_file.empty()) io::write_file(o.port_file, std::to_string(bound) + "\n");
  out << "listening on http://" << host << ':' << bound << std::endl;

  std::jthread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    server.stop();
  });
  server.run();
  // run() also returns when binding is lost; release the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Street-view visual environment evaluation pipeline", "urbanvis"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Options o;

  auto out_file = [&](CLI::App* c, const char* help = "output file") {
    c->add_option("--out", o.out, help)->required();
  };

  auto* sample = app.add_subcommand("sample", "Sample capture points along a street network");
  sample->add_option("--network", o.network, "street network GeoJSON")->required();
  sample->add_option("--interval-m", o.interval_m, "sampling interval in meters")->capture_default_str();
  sample->add_flag("--flip-side", o.flip_side, "face the left side of the street");
  out_file(sample, "points.csv");

  auto* codebook = app.add_subcommand("codebook", "Build a bag-of-visual-words codebook");
  codebook->add_option("--manifest", o.manifest, "images.csv")->required();
  codebook->add_option("--k", o.k, "vocabulary size")->capture_default_str();
  codebook->add_option("--max-descriptors", o.max_descriptors, "descriptor sample size")->capture_default_str();
  codebook->add_option("--max-iterations", o.max_iterations, "k-means iteration cap")->capture_default_str();
  codebook->add_option("--seed", o.seed)->capture_default_str();
  codebook->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  out_file(codebook, "codebook JSON");

  auto* features = app.add_subcommand("features", "Compute BoVW features or import embeddings");
  features->add_option("--manifest", o.manifest, "images.csv");
  features->add_option("--codebook", o.codebook, "codebook JSON");
  features->add_option("--import", o.import, "embedding CSV with an extractor_id header");
  features->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  out_file(features, "features.csv");

  auto* split = app.add_subcommand("split", "Stratified train/dev/test split");
  split->add_option("--labels", o.labels, "labels.jsonl")->required();
  split->add_option("--task", o.task)->required();
  split->add_option("--per-class-dev", o.per_class_dev)->capture_default_str();
  split->add_option("--per-class-test", o.per_class_test)->capture_default_str();
  split->add_option("--seed", o.seed)->capture_default_str();
  out_file(split, "split.csv");

  auto* train = app.add_subcommand("train", "Train a linear SVM for one task");
  train->add_option("--labels", o.labels, "labels.jsonl")->required();
  train->add_option("--task", o.task)->required();
  train->add_option("--features", o.features, "features.csv")->required();
  train->add_option("--split", o.split, "split.csv")->required();
  train->add_option("--lambda", o.lambda, "regularization strength")->capture_default_str();
  train->add_option("--lambda-grid", o.lambda_grid, "comma-separated lambdas selected on dev")->delimiter(',');
  train->add_option("--epochs", o.epochs)->capture_default_str();
  train->add_option("--seed", o.seed)->capture_default_str();
  train->add_option("--normalize", o.normalize, "none, l2 or standardize")->capture_default_str();
  train->add_option("--report", o.report, "metrics report JSON");
  out_file(train, "model file");

  auto* evaluate = app.add_subcommand("evaluate", "Report metrics of a model on each split");
  evaluate->add_option("--model", o.model)->required();
  evaluate->add_option("--labels", o.labels, "labels.jsonl")->required();
  evaluate->add_option("--features", o.features, "features.csv")->required();
  evaluate->add_option("--split", o.split, "split.csv")->required();
  evaluate->add_option("--out", o.out, "classification table CSV (default stdout)");
  evaluate->add_option("--mse-out", o.mse_out, "MSE table CSV (quality models)");

  auto* screen = app.add_subcommand("screen", "Drop images the qualification model rejects");
  screen->add_option("--manifest", o.manifest, "images.csv")->required();
  screen->add_option("--model", o.model, "qualification model")->required();
  screen->add_option("--features", o.features, "features.csv")->required();
  screen->add_option("--rejected", o.rejected, "manifest of rejected images");
  screen->add_option("--predictions", o.predictions, "predictions.csv");
  screen->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  out_file(screen, "manifest of qualified images");

  auto* score = app.add_subcommand("score", "Score qualified images and aggregate per segment");
  score->add_option("--manifest", o.manifest, "qualified images.csv")->required();
  score->add_option("--quality-model", o.quality_model)->required();
  score->add_option("--continuity-model", o.continuity_model)->required();
  score->add_option("--features", o.features, "features.csv")->required();
  score->add_option("--predictions", o.predictions, "predictions.csv");
  score->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  out_file(score, "scores.csv");

  auto* map = app.add_subcommand("map", "Export segment scores as GeoJSON");
  map->add_option("--scores", o.scores, "scores.csv")->required();
  map->add_option("--network", o.network, "street network GeoJSON")->required();
  map->add_option("--quality-bins", o.quality_bins, "bin edges")->delimiter(',')->capture_default_str();
  map->add_option("--continuity-bins", o.continuity_bins, "bin edges")->delimiter(',')->capture_default_str();
  out_file(map, "map GeoJSON");

  auto* validate = app.add_subcommand("validate", "Rank-correlate segment scores with survey ratings");
  validate->add_option("--scores", o.scores, "scores.csv")->required();
  validate->add_option("--survey", o.survey, "survey.csv")->required();
  validate->add_option("--out", o.out, "validation CSV (default stdout)");

  auto* serve = app.add_subcommand("serve", "Run the labeling service");
  serve->add_option("--listen", o.listen, "host:port (port 0 picks a free port)")->capture_default_str();
  serve->add_option("--manifest", o.manifest, "images.csv")->required();
  serve->add_option("--labels", o.labels, "labels.jsonl (created if missing)")->required();
  serve->add_option("--model", o.models, "model for the uncertain strategy (repeatable)");
  serve->add_option("--features", o.features, "features.csv for the models");
  serve->add_option("--ui-dir", o.ui_dir, "static UI bundle served at /");
  serve->add_option("--port-file", o.port_file, "write the bound port here");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic rated corpus");
  synth->add_option("--n-images", o.n_images)->capture_default_str();
  synth->add_option("--width", o.width)->capture_default_str();
  synth->add_option("--height", o.height)->capture_default_str();
  synth->add_option("--seed", o.seed, "corpus seed")->default_val(2016);
  out_file(synth, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const std::vector<std::pair<CLI::App*, void (*)(const Options&, std::ostream&)>> commands{
      {sample, cmd_sample},     {codebook, cmd_codebook}, {features, cmd_features}, {split, cmd_split},
      {train, cmd_train},       {evaluate, cmd_evaluate}, {screen, cmd_screen},     {score, cmd_score},
      {map, cmd_map},           {validate, cmd_validate}, {serve, cmd_serve},       {synth, cmd_synth}};
  try {
    for (const auto& [sub, fn] : commands) {
      if (sub->parsed()) fn(o, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace urbanvis
