#include "envdeg/model_io.hpp"

#include "envdeg/error.hpp"

#include <fstream>

namespace envdeg {

using nlohmann::json;

json model_to_json(const ModelParams& params) {
  json doc;
  doc["format"] = "envdeg-model";
  doc["version"] = model_schema_version;
  doc["K"] = params.K();
  doc["q"] = params.q();
  doc["M"] = params.basis.domain_end;
  doc["knots"] = params.basis.knots;
  doc["pi"] = std::vector<double>(params.pi.data(), params.pi.data() + params.pi.size());
  doc["sigma"] = std::vector<double>(params.sigma.data(), params.sigma.data() + params.sigma.size());
  json mu = json::array(), lambda = json::array();
  for (int k = 0; k < params.K(); ++k) {
    const auto& m = params.mu[static_cast<std::size_t>(k)];
    mu.push_back(std::vector<double>(m.data(), m.data() + m.size()));
    const auto& cov = params.lambda[static_cast<std::size_t>(k)];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(cov.size()));
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
      for (Eigen::Index j = 0; j < cov.cols(); ++j) flat.push_back(cov(i, j));
    }
    lambda.push_back(std::move(flat));
  }
  doc["mu"] = std::move(mu);
  doc["lambda"] = std::move(lambda);
  return doc;
}

ModelParams model_from_json(const json& doc) {
  try {
    if (doc.at("version").get<int>() != model_schema_version) {
      throw Error(ErrorCode::ParseError, "unsupported model schema version");
    }
    ModelParams p;
    p.basis = basis_from_knots(doc.at("knots").get<std::vector<double>>());
    const int K = doc.at("K").get<int>();
    const int q = doc.at("q").get<int>();
    if (q != p.basis.q || doc.at("M").get<double>() != p.basis.domain_end) {
      throw Error(ErrorCode::ParseError, "q/M disagree with the knot vector");
    }
    const auto pi = doc.at("pi").get<std::vector<double>>();
    const auto sigma = doc.at("sigma").get<std::vector<double>>();
    if (static_cast<int>(pi.size()) != K || static_cast<int>(sigma.size()) != K ||
        static_cast<int>(doc.at("mu").size()) != K || static_cast<int>(doc.at("lambda").size()) != K) {
      throw Error(ErrorCode::ParseError, "parameter arrays disagree with K");
    }
    p.pi = Eigen::Map<const Eigen::VectorXd>(pi.data(), K);
    p.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.data(), K);
    for (int k = 0; k < K; ++k) {
      const auto mu = doc.at("mu").at(static_cast<std::size_t>(k)).get<std::vector<double>>();
      const auto flat = doc.at("lambda").at(static_cast<std::size_t>(k)).get<std::vector<double>>();
      if (static_cast<int>(mu.size()) != q || static_cast<int>(flat.size()) != q * q) {
        throw Error(ErrorCode::ParseError, "cluster arrays have the wrong size");
      }
      p.mu.emplace_back(Eigen::Map<const Eigen::VectorXd>(mu.data(), q));
      p.lambda.emplace_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          flat.data(), q, q));
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model JSON: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void write_model(const ModelParams& params, const std::filesystem::path& path, const json& metadata) {
  json doc = model_to_json(params);
  if (!metadata.empty()) doc["run_config"] = metadata;
  write_json_file(doc, path);
}

ModelParams read_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

}  // namespace envdeg
