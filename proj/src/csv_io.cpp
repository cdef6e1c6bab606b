#include "reshmm/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace reshmm {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return kNegInf;
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw DataError(context + ": cannot parse '" + text + "' as a number");
  return v;
}

namespace {

long parse_int(const std::string& text, const std::string& context) {
  long v = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw DataError(context + ": cannot parse '" + text + "' as an integer");
  return v;
}

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

void expect_header(std::ifstream& in, const std::string& expected,
                   const std::string& path) {
  std::string line;
  if (!std::getline(in, line))
    throw DataError(path + ": missing header line");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw DataError(path + " line 1: expected header '" + expected + "'");
}

}  // namespace

TrainingCorpus read_corpus_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  expect_header(in, "waveform_id,t,y", path);

  TrainingCorpus corpus;
  std::vector<std::string> seen_ids;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + " line " + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 3)
      throw DataError(where + ": expected 3 fields, got " +
                      std::to_string(fields.size()));
    const std::string& id = fields[0];
    if (id.empty()) throw DataError(where + ": empty waveform_id");
    const long t = parse_int(fields[1], where);
    const double y = parse_double(fields[2], where);
    if (!std::isfinite(y)) throw DataError(where + ": y must be finite");

    if (corpus.waveforms.empty() || corpus.waveforms.back().id != id) {
      for (const auto& prev : seen_ids)
        if (prev == id)
          throw DataError(where + ": waveform '" + id +
                          "' appears in non-contiguous blocks");
      seen_ids.push_back(id);
      corpus.waveforms.push_back(WaveformSeries{id, {}});
    }
    auto& w = corpus.waveforms.back();
    if (t != w.length() + 1)
      throw DataError(where + ": time index " + std::to_string(t) +
                      " breaks the contiguous 1..T order for '" + id + "'");
    w.samples.push_back(y);
  }
  return corpus;
}

void write_corpus_csv(const std::string& path, const TrainingCorpus& corpus) {
  std::ofstream out = open_output(path);
  out << "waveform_id,t,y\n";
  for (const auto& w : corpus.waveforms)
    for (int t = 1; t <= w.length(); ++t)
      out << w.id << ',' << t << ',' << format_double(w.samples[t - 1]) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_scores_csv(const std::string& path,
                      const std::vector<ScoreVector>& scores) {
  std::ofstream out = open_output(path);
  out << "id,logp,score_shape,score_noise\n";
  for (const auto& s : scores)
    out << s.id << ',' << format_double(s.logp) << ','
        << format_double(s.score_shape) << ',' << format_double(s.score_noise)
        << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<ScoreVector> read_scores_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  expect_header(in, "id,logp,score_shape,score_noise", path);
  std::vector<ScoreVector> scores;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + " line " + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) throw DataError(where + ": expected 4 fields");
    scores.push_back(ScoreVector{fields[0], parse_double(fields[1], where),
                                 parse_double(fields[2], where),
                                 parse_double(fields[3], where)});
  }
  return scores;
}

void write_fit_log_csv(const std::string& path,
                       const std::vector<double>& loglik_trace) {
  std::ofstream out = open_output(path);
  out << "iter,loglik\n";
  for (size_t i = 0; i < loglik_trace.size(); ++i)
    out << i << ',' << format_double(loglik_trace[i]) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<double> read_fit_log_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  expect_header(in, "iter,loglik", path);
  std::vector<double> trace;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + " line " + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 2) throw DataError(where + ": expected 2 fields");
    trace.push_back(parse_double(fields[1], where));
  }
  return trace;
}

void write_predictions_csv(const std::string& path, const PredictionFile& file) {
  std::ofstream out = open_output(path);
  out << "id,t,y,forecast,pred_logp\n";
  auto summary_of = [&](const std::string& id) -> const PredictionReport* {
    for (const auto& [sid, rep] : file.summaries)
      if (sid == id) return &rep;
    return nullptr;
  };
  std::string current;
  for (size_t i = 0; i < file.rows.size(); ++i) {
    const auto& r = file.rows[i];
    out << r.id << ',' << r.t << ',' << format_double(r.y) << ','
        << format_double(r.forecast) << ',' << format_double(r.pred_logp)
        << '\n';
    const bool last_of_block =
        i + 1 == file.rows.size() || file.rows[i + 1].id != r.id;
    if (last_of_block) {
      if (const PredictionReport* rep = summary_of(r.id))
        out << r.id << ",mean,," << format_double(rep->mse) << ','
            << format_double(rep->mean_log_density) << '\n';
    }
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

PredictionFile read_predictions_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  expect_header(in, "id,t,y,forecast,pred_logp", path);
  PredictionFile file;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + " line " + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) throw DataError(where + ": expected 5 fields");
    if (fields[1] == "mean") {
      PredictionReport rep;
      rep.mse = parse_double(fields[3], where);
      rep.mean_log_density = parse_double(fields[4], where);
      file.summaries.emplace_back(fields[0], rep);
      continue;
    }
    file.rows.push_back(PredictionRow{
        fields[0], static_cast<int>(parse_int(fields[1], where)),
        parse_double(fields[2], where), parse_double(fields[3], where),
        parse_double(fields[4], where)});
  }
  return file;
}

void write_accuracy_csv(const std::string& path, const AccuracyTable& table) {
  std::ofstream out = open_output(path);
  out << "feature_set,k,fold,accuracy\n";
  for (const auto& r : table.rows)
    out << r.feature_set << ',' << r.k << ',' << r.fold << ','
        << format_double(r.accuracy) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<AccuracyRow> read_accuracy_csv(const std::string& path) {
  std::ifstream in = open_input(path);
  expect_header(in, "feature_set,k,fold,accuracy", path);
  std::vector<AccuracyRow> rows;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::string where = path + " line " + std::to_string(line_no);
    const auto fields = split_csv_line(line);
    if (fields.size() != 4) throw DataError(where + ": expected 4 fields");
    rows.push_back(AccuracyRow{fields[0],
                               static_cast<int>(parse_int(fields[1], where)),
                               static_cast<int>(parse_int(fields[2], where)),
                               parse_double(fields[3], where)});
  }
  return rows;
}

std::string accuracy_summary_json(const AccuracyTable& table) {
  json j;
  j["best"] = {{"feature_set", table.best_feature_set}, {"k", table.best_k}};
  json rows = json::array();
  for (const auto& s : table.summary)
    rows.push_back({{"feature_set", s.feature_set},
                    {"k", s.k},
                    {"mean_accuracy", s.mean},
                    {"sd_accuracy", s.sd}});
  j["summary"] = std::move(rows);
  return j.dump(2) + "\n";
}

namespace {

json segment_to_json(const Segment& s) {
  return json{{"state", s.state}, {"start", s.start}, {"duration", s.duration}};
}

Segment segment_from_json(const json& j) {
  return Segment{j.at("state").get<int>(), j.at("start").get<int>(),
                 j.at("duration").get<int>()};
}

}  // namespace

std::string segments_to_json(const std::vector<SegmentationRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["supported"] = r.supported;
    if (r.supported) {
      json segs = json::array();
      for (const auto& s : r.segmentation.segments)
        segs.push_back(segment_to_json(s));
      j["segments"] = std::move(segs);
      j["log_joint"] = r.segmentation.log_joint;
      j["seg_mse"] = r.seg_mse;
    } else {
      j["segments"] = json::array();
      j["log_joint"] = nullptr;  // JSON has no -inf
      j["seg_mse"] = nullptr;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<SegmentationRecord> segments_from_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("segments file is not valid JSON: ") + e.what());
  }
  std::vector<SegmentationRecord> records;
  try {
    for (const auto& j : arr) {
      SegmentationRecord r;
      r.id = j.at("id").get<std::string>();
      r.supported = j.at("supported").get<bool>();
      if (r.supported) {
        for (const auto& s : j.at("segments"))
          r.segmentation.segments.push_back(segment_from_json(s));
        r.segmentation.log_joint = j.at("log_joint").get<double>();
        r.seg_mse = j.at("seg_mse").get<double>();
      } else {
        r.segmentation.log_joint = kNegInf;
        r.seg_mse = std::numeric_limits<double>::quiet_NaN();
      }
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("segments file schema error: ") + e.what());
  }
  return records;
}

void write_segment_plot_csv(const std::string& path,
                            const TrainingCorpus& corpus,
                            const std::vector<SegmentationRecord>& records) {
  std::ofstream out = open_output(path);
  out << "id,t,y,state,fitted\n";
  for (const auto& r : records) {
    const WaveformSeries* w = nullptr;
    for (const auto& cw : corpus.waveforms)
      if (cw.id == r.id) w = &cw;
    if (w == nullptr) continue;
    std::vector<int> state_of(w->length(), 0);
    std::vector<double> fitted(w->length(),
                               std::numeric_limits<double>::quiet_NaN());
    if (r.supported) {
      fitted = segmentation_fitted(*w, r.segmentation);
      for (const auto& s : r.segmentation.segments)
        for (int i = 0; i < s.duration; ++i) state_of[s.start - 1 + i] = s.state;
    }
    for (int t = 1; t <= w->length(); ++t)
      out << r.id << ',' << t << ',' << format_double(w->samples[t - 1]) << ','
          << state_of[t - 1] << ',' << format_double(fitted[t - 1]) << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string truth_to_json(const std::vector<WaveformTruth>& truths) {
  json arr = json::array();
  for (const auto& t : truths) {
    json j;
    j["id"] = t.id;
    json segs = json::array();
    json us = json::array();
    for (const auto& s : t.segments) {
      json seg = segment_to_json(s.segment);
      seg["truncated"] = s.truncated;
      segs.push_back(std::move(seg));
      us.push_back(
          {{"state", s.segment.state}, {"u0", s.u(0)}, {"u1", s.u(1)}});
    }
    j["segments"] = std::move(segs);
    j["u"] = std::move(us);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::vector<WaveformTruth> truth_from_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("truth file is not valid JSON: ") + e.what());
  }
  std::vector<WaveformTruth> truths;
  try {
    for (const auto& j : arr) {
      WaveformTruth t;
      t.id = j.at("id").get<std::string>();
      const auto& segs = j.at("segments");
      const auto& us = j.at("u");
      for (size_t i = 0; i < segs.size(); ++i) {
        SegmentTruth s;
        s.segment = segment_from_json(segs[i]);
        s.truncated = segs[i].value("truncated", false);
        s.u << us[i].at("u0").get<double>(), us[i].at("u1").get<double>();
        t.segments.push_back(std::move(s));
      }
      truths.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("truth file schema error: ") + e.what());
  }
  return truths;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out = open_output(path);
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in = open_input(path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace reshmm
