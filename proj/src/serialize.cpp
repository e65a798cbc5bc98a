#include "dapt/serialize.hpp"

#include <fstream>
#include <sstream>

#include "dapt/errors.hpp"

namespace dapt {

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"values", m.data}};
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  const int rows = require_field<int>(j, "rows", what);
  const int cols = require_field<int>(j, "cols", what);
  auto values = require_field<std::vector<double>>(j, "values", what);
  if (rows < 0 || cols < 0 ||
      values.size() != static_cast<size_t>(rows) * static_cast<size_t>(cols)) {
    throw ParseError(what + ": value count does not match shape " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  Matrix m(rows, cols);
  m.data = std::move(values);
  return m;
}

json params_to_json(const PromptParams& p) {
  return json{{"Vc", matrix_to_json(p.Vc)},
              {"Vs", matrix_to_json(p.Vs)},
              {"Vt", matrix_to_json(p.Vt)}};
}

PromptParams params_from_json(const json& j, const std::string& what) {
  PromptParams p;
  p.Vc = matrix_from_json(require_field<json>(j, "Vc", what), what + ".Vc");
  p.Vs = matrix_from_json(require_field<json>(j, "Vs", what), what + ".Vs");
  p.Vt = matrix_from_json(require_field<json>(j, "Vt", what), what + ".Vt");
  if (!p.Vs.same_shape(p.Vt) || (p.Vc.rows > 0 && p.Vs.rows > 0 && p.Vc.cols != p.Vs.cols)) {
    throw ParseError(what + ": parameter block shapes are inconsistent");
  }
  return p;
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(path + ": cannot open file for writing");
  out << content;
  if (!out) throw ParseError(path + ": write failed");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dapt
