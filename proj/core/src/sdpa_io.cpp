#include "lpvsyn/sdp/sdpa_io.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace lpvsyn::sdp {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string sign_name(ScalarSign s) {
  switch (s) {
    case ScalarSign::kFree: return "free";
    case ScalarSign::kNonNegative: return "nonneg";
    case ScalarSign::kStrictPositive: return "strict";
  }
  return "free";
}

ScalarSign sign_from_name(const std::string& s) {
  if (s == "free") return ScalarSign::kFree;
  if (s == "nonneg") return ScalarSign::kNonNegative;
  if (s == "strict") return ScalarSign::kStrictPositive;
  throw std::invalid_argument("parse_sdpa: unknown sign kind '" + s + "'");
}

struct Entry {
  int mat, block;
  Eigen::Index i, j;
  double value;
};

}  // namespace

std::string export_sdpa(const SdpProblem& problem) {
  problem.validate();
  std::ostringstream out;
  const int m = problem.num_scalars();

  std::vector<int> signed_scalars;
  for (int i = 0; i < m; ++i) {
    if (problem.scalar_signs()[static_cast<size_t>(i)] != ScalarSign::kFree) {
      signed_scalars.push_back(i);
    }
  }

  out << "*LPVSYN SDPA export\n";
  out << "*OBJ " << (problem.is_feasibility() ? "feasibility" : "minimize") << "\n";
  for (int i = 0; i < m; ++i) {
    out << "*SCALAR " << i << " " << sign_name(problem.scalar_signs()[static_cast<size_t>(i)])
        << " " << problem.scalar_labels()[static_cast<size_t>(i)] << "\n";
  }
  for (Eigen::Index j = 0; j < problem.num_blocks(); ++j) {
    out << "*BLOCK " << j << " " << problem.blocks()[static_cast<size_t>(j)].label << "\n";
  }

  const int nblocks = static_cast<int>(problem.num_blocks()) + (signed_scalars.empty() ? 0 : 1);
  out << m << "\n" << nblocks << "\n";
  for (Eigen::Index j = 0; j < problem.num_blocks(); ++j) {
    out << (j ? " " : "") << problem.blocks()[static_cast<size_t>(j)].dim;
  }
  if (!signed_scalars.empty()) {
    out << (problem.num_blocks() ? " " : "") << "-" << signed_scalars.size();
  }
  out << "\n";
  for (int i = 0; i < m; ++i) {
    out << (i ? " " : "") << fmt(problem.is_feasibility() ? 0.0 : problem.objective()[i]);
  }
  if (m == 0) out << "0";
  out << "\n";

  // Constant matrices first (matno 0 holds -constant), then per-variable
  // coefficients; 1-based upper-triangle indices throughout.
  auto emit = [&out](int mat, int block, Eigen::Index i, Eigen::Index j, double v) {
    if (v != 0.0) {
      out << mat << " " << block << " " << (i + 1) << " " << (j + 1) << " " << fmt(v) << "\n";
    }
  };
  for (Eigen::Index j = 0; j < problem.num_blocks(); ++j) {
    const auto& b = problem.blocks()[static_cast<size_t>(j)];
    for (Eigen::Index r = 0; r < b.dim; ++r) {
      for (Eigen::Index c = r; c < b.dim; ++c) emit(0, static_cast<int>(j) + 1, r, c, -b.constant(r, c));
    }
  }
  for (int var = 0; var < m; ++var) {
    for (Eigen::Index j = 0; j < problem.num_blocks(); ++j) {
      const auto& b = problem.blocks()[static_cast<size_t>(j)];
      const auto it = b.coeffs.find(var);
      if (it == b.coeffs.end()) continue;
      for (Eigen::Index r = 0; r < b.dim; ++r) {
        for (Eigen::Index c = r; c < b.dim; ++c) emit(var + 1, static_cast<int>(j) + 1, r, c, it->second(r, c));
      }
    }
    for (size_t k = 0; k < signed_scalars.size(); ++k) {
      if (signed_scalars[k] == var) {
        emit(var + 1, nblocks, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), 1.0);
      }
    }
  }
  return out.str();
}

SdpProblem parse_sdpa(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::pair<int, std::pair<std::string, std::string>>> scalar_meta;  // idx -> (sign, label)
  std::vector<std::pair<int, std::string>> block_meta;
  bool has_meta = false;
  bool meta_feasibility = false;
  std::vector<std::string> body;

  while (std::getline(in, line)) {
    if (!line.empty() && (line[0] == '*' || line[0] == '"')) {
      std::istringstream ls(line.substr(1));
      std::string tag;
      ls >> tag;
      if (tag == "OBJ") {
        std::string kind;
        ls >> kind;
        meta_feasibility = (kind == "feasibility");
        has_meta = true;
      } else if (tag == "SCALAR") {
        int idx;
        std::string sign;
        ls >> idx >> sign;
        std::string label;
        std::getline(ls, label);
        if (!label.empty() && label.front() == ' ') label.erase(0, 1);
        scalar_meta.emplace_back(idx, std::make_pair(sign, label));
        has_meta = true;
      } else if (tag == "BLOCK") {
        int idx;
        ls >> idx;
        std::string label;
        std::getline(ls, label);
        if (!label.empty() && label.front() == ' ') label.erase(0, 1);
        block_meta.emplace_back(idx, label);
        has_meta = true;
      }
      continue;
    }
    // Strip SDPA punctuation tolerated in headers.
    for (char& ch : line) {
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    }
    if (line.find_first_not_of(" \t\r") != std::string::npos) body.push_back(line);
  }
  if (body.size() < 4) throw std::invalid_argument("parse_sdpa: truncated input");

  size_t cursor = 0;
  auto next_tokens = [&](size_t want) {
    std::vector<double> vals;
    while (vals.size() < want && cursor < body.size()) {
      std::istringstream ls(body[cursor++]);
      double v;
      while (ls >> v) vals.push_back(v);
    }
    if (vals.size() < want) throw std::invalid_argument("parse_sdpa: unexpected end of header");
    return vals;
  };

  const int m = static_cast<int>(next_tokens(1)[0]);
  const int nblocks = static_cast<int>(next_tokens(1)[0]);
  const std::vector<double> sizes = next_tokens(static_cast<size_t>(nblocks));
  const std::vector<double> cvec = next_tokens(static_cast<size_t>(std::max(m, 1)));

  std::vector<Entry> entries;
  while (cursor < body.size()) {
    std::istringstream ls(body[cursor++]);
    Entry e;
    if (ls >> e.mat >> e.block >> e.i >> e.j >> e.value) entries.push_back(e);
  }

  // With export metadata the trailing diagonal block encodes scalar signs and
  // is not materialized; foreign diagonal blocks become plain PSD blocks.
  const bool meta_sign_block =
      has_meta && nblocks > 0 && sizes.back() < 0 &&
      std::any_of(scalar_meta.begin(), scalar_meta.end(),
                  [](const auto& sm) { return sm.second.first != "free"; });
  const int nreal = meta_sign_block ? nblocks - 1 : nblocks;

  SdpProblem problem;
  for (int i = 0; i < m; ++i) {
    problem.add_scalars(1, ScalarSign::kFree, "y" + std::to_string(i));
  }
  std::vector<int> sign_slot_to_scalar;
  if (has_meta) {
    SdpProblem rebuilt;
    std::vector<std::pair<std::string, std::string>> meta(static_cast<size_t>(m),
                                                          {"free", ""});
    for (const auto& [idx, sl] : scalar_meta) {
      if (idx < 0 || idx >= m) throw std::invalid_argument("parse_sdpa: scalar index");
      meta[static_cast<size_t>(idx)] = sl;
    }
    for (int i = 0; i < m; ++i) {
      rebuilt.add_scalars(1, sign_from_name(meta[static_cast<size_t>(i)].first),
                          meta[static_cast<size_t>(i)].second.empty()
                              ? "y" + std::to_string(i)
                              : meta[static_cast<size_t>(i)].second);
      if (meta[static_cast<size_t>(i)].first != "free") sign_slot_to_scalar.push_back(i);
    }
    problem = std::move(rebuilt);
  }

  std::vector<int> block_ids;
  for (int j = 0; j < nreal; ++j) {
    const auto dim = static_cast<Eigen::Index>(std::abs(sizes[static_cast<size_t>(j)]));
    std::string label = "block" + std::to_string(j);
    for (const auto& [idx, bl] : block_meta) {
      if (idx == j) label = bl;
    }
    block_ids.push_back(problem.add_block(dim, label));
  }

  for (const auto& e : entries) {
    if (e.block < 1 || e.block > nblocks) throw std::invalid_argument("parse_sdpa: block index");
    if (meta_sign_block && e.block == nblocks) continue;  // canonical sign entries
    const int bj = block_ids[static_cast<size_t>(e.block - 1)];
    const auto dim = problem.blocks()[static_cast<size_t>(bj)].dim;
    if (e.i < 1 || e.j < e.i || e.j > dim) throw std::invalid_argument("parse_sdpa: entry index");
    Eigen::MatrixXd v(1, 1);
    if (e.mat == 0) {
      v(0, 0) = -e.value;
      problem.add_constant(bj, e.i - 1, e.j - 1, v);
    } else {
      if (e.mat < 1 || e.mat > m) throw std::invalid_argument("parse_sdpa: variable index");
      v(0, 0) = e.value;
      problem.add_coeff(bj, e.mat - 1, e.i - 1, e.j - 1, v);
    }
  }

  const bool feasibility =
      has_meta ? meta_feasibility
               : std::all_of(cvec.begin(), cvec.end(), [](double v) { return v == 0.0; });
  if (!feasibility) {
    Eigen::VectorXd c(m);
    for (int i = 0; i < m; ++i) c[i] = cvec[static_cast<size_t>(i)];
    problem.set_objective(c);
  }
  return problem;
}

std::string problem_to_json(const SdpProblem& problem) {
  nlohmann::json j;
  j["num_scalars"] = problem.num_scalars();
  j["scalar_labels"] = problem.scalar_labels();
  std::vector<std::string> signs;
  for (auto s : problem.scalar_signs()) signs.push_back(sign_name(s));
  j["scalar_signs"] = signs;
  if (!problem.is_feasibility()) {
    j["objective"] = std::vector<double>(problem.objective().data(),
                                         problem.objective().data() + problem.objective().size());
  }
  auto mat_to_json = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(row);
    }
    return rows;
  };
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : problem.blocks()) {
    nlohmann::json bj;
    bj["dim"] = b.dim;
    bj["label"] = b.label;
    bj["constant"] = mat_to_json(b.constant);
    nlohmann::json coeffs = nlohmann::json::object();
    for (const auto& [var, cm] : b.coeffs) coeffs[std::to_string(var)] = mat_to_json(cm);
    bj["coeffs"] = coeffs;
    j["blocks"].push_back(bj);
  }
  return j.dump(2);
}

}  // namespace lpvsyn::sdp
