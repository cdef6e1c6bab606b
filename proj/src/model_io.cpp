#include "reshmm/model_io.hpp"

#include <fstream>

#include <json.hpp>

namespace reshmm {

using nlohmann::json;

std::string model_to_json(const ModelParams& params) {
  params.validate();
  const int M = params.num_states;
  json j;
  j["format_version"] = 1;
  j["M"] = M;
  j["d_max"] = params.d_max;
  json rows = json::array();
  for (int r = 0; r <= M; ++r) {
    json row = json::array();
    for (int c = 0; c < M; ++c) row.push_back(params.transitions(r, c));
    rows.push_back(std::move(row));
  }
  j["A"] = std::move(rows);
  json states = json::array();
  for (const auto& s : params.states) {
    json st;
    st["lambda"] = s.lambda;
    st["beta"] = {s.beta(0), s.beta(1)};
    st["psi"] = {{s.psi(0, 0), s.psi(0, 1)}, {s.psi(1, 0), s.psi(1, 1)}};
    states.push_back(std::move(st));
  }
  j["states"] = std::move(states);
  j["sigma2"] = params.sigma2;
  return j.dump(2) + "\n";
}

ModelParams model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format_version", 0) != 1)
      throw DataError("model file has an unsupported format_version");
    ModelParams params;
    params.num_states = j.at("M").get<int>();
    params.d_max = j.at("d_max").get<int>();
    const int M = params.num_states;
    const auto& rows = j.at("A");
    if (static_cast<int>(rows.size()) != M + 1)
      throw DataError("model file: A must have M+1 rows");
    params.transitions.resize(M + 1, M);
    for (int r = 0; r <= M; ++r) {
      if (static_cast<int>(rows[r].size()) != M)
        throw DataError("model file: A rows must have M entries");
      for (int c = 0; c < M; ++c)
        params.transitions(r, c) = rows[r][c].get<double>();
    }
    const auto& states = j.at("states");
    if (static_cast<int>(states.size()) != M)
      throw DataError("model file: states must have M entries");
    for (const auto& st : states) {
      StateParams s;
      s.lambda = st.at("lambda").get<double>();
      s.beta << st.at("beta")[0].get<double>(), st.at("beta")[1].get<double>();
      const auto& psi = st.at("psi");
      s.psi << psi[0][0].get<double>(), psi[0][1].get<double>(),
          psi[1][0].get<double>(), psi[1][1].get<double>();
      params.states.push_back(s);
    }
    params.sigma2 = j.at("sigma2").get<double>();
    try {
      params.validate();
    } catch (const ConfigError& e) {
      throw DataError(std::string("model file fails validation: ") + e.what());
    }
    return params;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file schema error: ") + e.what());
  }
}

void save_model(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << model_to_json(params);
  if (!out) throw DataError("failed writing model to '" + path + "'");
}

ModelParams load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace reshmm
