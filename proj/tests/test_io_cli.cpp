#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "reshmm/csv_io.hpp"
#include "reshmm/model_io.hpp"
#include "reshmm/synth.hpp"
#include "test_util.hpp"

using namespace reshmm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("reshmm_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string cli_path() {
  const char* env = std::getenv("RESHMM_CLI");
  REQUIRE_MESSAGE(env != nullptr, "RESHMM_CLI must point at the built binary");
  return env;
}

int run_cli(const std::string& args) {
  const int status = std::system((cli_path() + " " + args + " 2>/dev/null").c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("io_cli") {

TEST_CASE("doubles round-trip through the shortest exact form") {
  Rng rng(251);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform() * 20 - 10);
    CHECK(parse_double(format_double(v), "test") == v);
  }
  CHECK(format_double(kNegInf) == "-inf");
  CHECK(parse_double("-inf", "test") == kNegInf);
  CHECK(std::isnan(parse_double("nan", "test")));
}

TEST_CASE("corpus CSV round-trips value-exactly") {
  TempDir tmp;
  Rng rng(257);
  const ModelParams p = testutil::random_model(rng, 2, 20);
  GeneratorConfig cfg{p, 5, 3, 0};
  const TrainingCorpus corpus = sample_corpus(cfg).corpus;
  write_corpus_csv(tmp.file("c.csv"), corpus);
  const TrainingCorpus back = read_corpus_csv(tmp.file("c.csv"));
  REQUIRE(back.waveforms.size() == corpus.waveforms.size());
  for (size_t i = 0; i < corpus.waveforms.size(); ++i) {
    CHECK(back.waveforms[i].id == corpus.waveforms[i].id);
    CHECK(back.waveforms[i].samples == corpus.waveforms[i].samples);
  }
}

TEST_CASE("corpus CSV diagnostics carry line numbers") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.csv"));
    out << "waveform_id,t,y\nw0,1,0.5\na,b,c\n";
  }
  try {
    read_corpus_csv(tmp.file("bad.csv"));
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  {
    std::ofstream out(tmp.file("gap.csv"));
    out << "waveform_id,t,y\nw0,1,0.5\nw0,3,0.7\n";
  }
  CHECK_THROWS_AS(read_corpus_csv(tmp.file("gap.csv")), DataError);

  {
    std::ofstream out(tmp.file("split.csv"));
    out << "waveform_id,t,y\nw0,1,0.5\nw1,1,0.1\nw0,2,0.7\n";
  }
  CHECK_THROWS_AS(read_corpus_csv(tmp.file("split.csv")), DataError);
}

TEST_CASE("scores, fit log, predictions and accuracy files round-trip") {
  TempDir tmp;
  std::vector<ScoreVector> scores = {{"a", -12.5, -3.25, -9.25},
                                     {"b", kNegInf, kNegInf, kNegInf}};
  write_scores_csv(tmp.file("s.csv"), scores);
  const auto s2 = read_scores_csv(tmp.file("s.csv"));
  REQUIRE(s2.size() == 2);
  CHECK(s2[0].logp == -12.5);
  CHECK(s2[1].logp == kNegInf);

  write_fit_log_csv(tmp.file("f.csv"), {-100.0, -90.5, -90.25});
  CHECK(read_fit_log_csv(tmp.file("f.csv")) ==
        std::vector<double>{-100.0, -90.5, -90.25});

  PredictionFile pf;
  pf.rows = {{"a", 1, 0.5, 0.25, -1.5}, {"a", 2, 0.75, 0.5, -1.25}};
  pf.summaries = {{"a", PredictionReport{-1.375, 0.09375}}};
  write_predictions_csv(tmp.file("p.csv"), pf);
  const PredictionFile pf2 = read_predictions_csv(tmp.file("p.csv"));
  REQUIRE(pf2.rows.size() == 2);
  CHECK(pf2.rows[1].forecast == 0.5);
  REQUIRE(pf2.summaries.size() == 1);
  CHECK(pf2.summaries[0].second.mse == 0.09375);

  AccuracyTable table;
  table.rows = {{"logp", 1, 0, 0.75}, {"raw", 3, 4, 0.5}};
  write_accuracy_csv(tmp.file("a.csv"), table);
  const auto rows = read_accuracy_csv(tmp.file("a.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].k == 3);
  CHECK(rows[1].accuracy == 0.5);
}

TEST_CASE("segments JSON round-trips, including unsupported records") {
  std::vector<SegmentationRecord> records(2);
  records[0].id = "ok";
  records[0].segmentation.segments = {Segment{1, 1, 4}, Segment{2, 5, 3}};
  records[0].segmentation.log_joint = -41.5;
  records[0].seg_mse = 0.125;
  records[1].id = "bad";
  records[1].supported = false;
  const auto back = segments_from_json(segments_to_json(records));
  REQUIRE(back.size() == 2);
  CHECK(back[0].segmentation.segments.size() == 2);
  CHECK(back[0].segmentation.log_joint == -41.5);
  CHECK(back[1].supported == false);
  CHECK(back[1].segmentation.log_joint == kNegInf);
}

TEST_CASE("truth JSON round-trips") {
  Rng rng(263);
  const ModelParams p = testutil::random_model(rng, 3, 20);
  GeneratorConfig cfg{p, 4, 17, 0};
  const SampledCorpus sc = sample_corpus(cfg);
  const auto back = truth_from_json(truth_to_json(sc.truths));
  REQUIRE(back.size() == sc.truths.size());
  for (size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].segments.size() == sc.truths[i].segments.size());
    for (size_t j = 0; j < back[i].segments.size(); ++j) {
      CHECK(back[i].segments[j].segment.state ==
            sc.truths[i].segments[j].segment.state);
      CHECK(back[i].segments[j].u == sc.truths[i].segments[j].u);
    }
  }
}

TEST_CASE("cli: generate, train, score, segment, predict pipeline") {
  TempDir tmp;
  const std::string corpus = tmp.file("corpus.csv");
  const std::string model = tmp.file("model.json");

  CHECK(run_cli("generate --preset demo-a --n 6 --seed 5 --out " + corpus +
                " --truth " + tmp.file("truth.json")) == 0);
  CHECK(run_cli("train " + corpus + " --states 4 --max-iter 3 --seed 1 --out " +
                model) == 0);
  CHECK(run_cli("score " + model + " " + corpus + " --out " + tmp.file("s.csv")) == 0);
  CHECK(run_cli("segment " + model + " " + corpus + " --out " +
                tmp.file("seg.json")) == 0);
  CHECK(run_cli("predict " + model + " " + corpus + " --out " +
                tmp.file("p.csv")) == 0);

  // outputs re-parse with the library readers
  const auto scores = read_scores_csv(tmp.file("s.csv"));
  CHECK(scores.size() == 6);
  for (const auto& s : scores) CHECK(std::isfinite(s.logp));
  const auto segs = segments_from_json(read_text_file(tmp.file("seg.json")));
  CHECK(segs.size() == 6);
  const auto corpus_back = read_corpus_csv(corpus);
  for (size_t i = 0; i < segs.size(); ++i) {
    int pos = 1;
    for (const auto& s : segs[i].segmentation.segments) {
      CHECK(s.start == pos);
      pos += s.duration;
    }
    CHECK(pos == corpus_back.waveforms[i].length() + 1);
  }
  const auto preds = read_predictions_csv(tmp.file("p.csv"));
  CHECK(preds.summaries.size() == 6);
  const auto fit_log = read_fit_log_csv(tmp.file("model_fit.csv"));
  CHECK(fit_log.size() >= 2);
}

TEST_CASE("cli: identical runs are byte-identical") {
  TempDir tmp;
  const std::string base = "generate --preset demo-b --n 4 --seed 11 --out ";
  CHECK(run_cli(base + tmp.file("a.csv")) == 0);
  CHECK(run_cli(base + tmp.file("b.csv")) == 0);
  CHECK(read_text_file(tmp.file("a.csv")) == read_text_file(tmp.file("b.csv")));

  const std::string train = " --states 4 --max-iter 2 --seed 3 --out ";
  CHECK(run_cli("train " + tmp.file("a.csv") + train + tmp.file("m1.json")) == 0);
  CHECK(run_cli("train " + tmp.file("b.csv") + train + tmp.file("m2.json")) == 0);
  CHECK(read_text_file(tmp.file("m1.json")) == read_text_file(tmp.file("m2.json")));
}

TEST_CASE("cli: data errors exit with code 2 and name the line") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.csv"));
    out << "waveform_id,t,y\na,b,c\n";
  }
  CHECK(run_cli("train " + tmp.file("bad.csv") + " --states 2 --out " +
                tmp.file("m.json")) == 2);
  CHECK(run_cli("score " + tmp.file("missing.json") + " " + tmp.file("bad.csv") +
                " --out " + tmp.file("s.csv")) == 2);
}

TEST_CASE("cli: scoring an empty corpus writes a bare header and exits 0") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("empty.csv"));
    out << "waveform_id,t,y\n";
  }
  Rng rng(271);
  save_model(tmp.file("m.json"), testutil::random_model(rng, 2, 10));
  CHECK(run_cli("score " + tmp.file("m.json") + " " + tmp.file("empty.csv") +
                " --out " + tmp.file("s.csv")) == 0);
  CHECK(read_text_file(tmp.file("s.csv")) == "id,logp,score_shape,score_noise\n");
}

TEST_CASE("cli: train with --max-iter 0 emits the initialization") {
  TempDir tmp;
  CHECK(run_cli("generate --preset demo-a --n 5 --seed 2 --out " +
                tmp.file("c.csv")) == 0);
  CHECK(run_cli("train " + tmp.file("c.csv") +
                " --states 4 --max-iter 0 --out " + tmp.file("m.json")) == 0);
  const auto trace = read_fit_log_csv(tmp.file("m_fit.csv"));
  CHECK(trace.size() == 1);
  const ModelParams m = load_model(tmp.file("m.json"));
  const TrainingCorpus c = read_corpus_csv(tmp.file("c.csv"));
  int d_max = 0;
  for (const auto& w : c.waveforms) d_max = std::max(d_max, w.length());
  const ModelParams init = initialize(c, 4, d_max, 0);
  CHECK(m.states[0].beta == init.states[0].beta);
  CHECK(m.sigma2 == init.sigma2);
}

TEST_CASE("cli: classify runs the nested protocol end to end") {
  TempDir tmp;
  CHECK(run_cli("generate --preset demo-a --n 8 --seed 21 --out " +
                tmp.file("pos.csv")) == 0);
  CHECK(run_cli("generate --preset demo-b --n 6 --seed 22 --out " +
                tmp.file("neg.csv")) == 0);
  // distinct ids across the two corpora
  {
    TrainingCorpus neg = read_corpus_csv(tmp.file("neg.csv"));
    for (auto& w : neg.waveforms) w.id = "n_" + w.id;
    write_corpus_csv(tmp.file("neg.csv"), neg);
  }
  CHECK(run_cli("classify " + tmp.file("pos.csv") + " " + tmp.file("neg.csv") +
                " --states 4 --max-iter 2 --k 1 3 --seed 9 --out " +
                tmp.file("acc.csv")) == 0);
  const auto rows = read_accuracy_csv(tmp.file("acc.csv"));
  CHECK(rows.size() == 3 * 2 * 5);
  CHECK(fs::exists(tmp.file("acc_summary.json")));
}

TEST_CASE("cli: configuration errors exit with code 3") {
  TempDir tmp;
  CHECK(run_cli("generate --preset nope --n 2 --out " + tmp.file("x.csv")) == 3);
}

}  // TEST_SUITE
