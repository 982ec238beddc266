#include "cdnlb/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace cdnlb {

using nlohmann::json;

Matrix read_matrix(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Io, "line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::NonSquare, "line " + std::to_string(line_no) + " has " +
                                            std::to_string(row.size()) + " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "matrix file has no rows");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  const auto old = out.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
  out.precision(old);
}

namespace {

Vector vector_or_scalar(const json& j, Index n, const char* key) {
  if (j.is_number()) return Vector::Constant(n, j.get<double>());
  if (!j.is_array()) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be a number or array");
  if (static_cast<Index>(j.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(key) + " has " + std::to_string(j.size()) + " entries, expected " +
                    std::to_string(n));
  }
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::InvalidConfig, "correlation rows must be a nonempty array");
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j.front().size());
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& r = j.at(static_cast<std::size_t>(i));
    if (static_cast<Index>(r.size()) != cols) throw Error(ErrorCode::NonSquare, "ragged correlation rows");
    for (Index k = 0; k < cols; ++k) m(i, k) = r.at(static_cast<std::size_t>(k)).get<double>();
  }
  return m;
}

}  // namespace

SystemInstance parse_instance(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("instance is not valid JSON: ") + e.what());
  }
  try {
    const json& cj = doc.at("correlation");
    Matrix raw;
    if (cj.is_string()) {
      std::filesystem::path p = cj.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      raw = read_matrix_file(p);
    } else {
      raw = matrix_from_json(cj);
    }
    CorrelationMatrix c = validate_correlation(raw);
    const Index n = c.size();

    Vector arrivals = vector_or_scalar(doc.at("arrivals"), n, "arrivals");
    Vector capacities = vector_or_scalar(doc.at("capacities"), n, "capacities");

    CostParams costs = CostParams::uniform(n, NodeCosts{});
    if (doc.contains("costs")) {
      const json& k = doc.at("costs");
      if (k.contains("eta")) costs.eta = vector_or_scalar(k.at("eta"), n, "eta");
      if (k.contains("theta")) costs.theta = vector_or_scalar(k.at("theta"), n, "theta");
      if (k.contains("d")) costs.d = vector_or_scalar(k.at("d"), n, "d");
      if (k.contains("gamma_cost")) costs.gamma_cost = vector_or_scalar(k.at("gamma_cost"), n, "gamma_cost");
    }
    return SystemInstance(std::move(c), std::move(arrivals), std::move(capacities), std::move(costs));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("instance: ") + e.what());
  }
}

SystemInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_instance(buf.str(), path.parent_path());
}

std::string instance_to_json(const SystemInstance& instance) {
  auto to_array = [](const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  json rows = json::array();
  const Matrix& m = instance.correlation().matrix();
  for (Index i = 0; i < m.rows(); ++i) {
    Vector r = m.row(i).transpose();
    rows.push_back(to_array(r));
  }
  json doc = {
      {"correlation", rows},
      {"arrivals", to_array(instance.arrivals())},
      {"capacities", to_array(instance.capacities())},
      {"costs",
       {{"eta", to_array(instance.costs().eta)},
        {"theta", to_array(instance.costs().theta)},
        {"d", to_array(instance.costs().d)},
        {"gamma_cost", to_array(instance.costs().gamma_cost)}}},
  };
  return doc.dump(2);
}

Vector parse_vector_list(std::string_view text) {
  std::vector<double> values;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfig, "bad list entry '" + item + "'");
    }
  }
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "empty list");
  return Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace cdnlb
