#pragma once

// Matrix file formats.
//
// JSON:  {"n": <int>, "entries": [[{"re": <float>, "im": <float>}, ...], ...]}
//        row-major, exactly n rows of n entries.
// Text:  n lines of n whitespace-separated tokens, each `a`, `a+bi` or `a-bi`
//        (pure imaginary `bi`, `i`, `-i` are accepted as well).

#include <charconv>
#include <cstdio>
#include <istream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ahm/core.hpp"

namespace ahm::io {

using nlohmann::json;

inline json to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back({{"re", m(i, j).real()}, {"im", m(i, j).imag()}});
    rows.push_back(std::move(row));
  }
  return {{"n", m.rows()}, {"entries", std::move(rows)}};
}

inline Matrix from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("n") || !doc.contains("entries"))
    throw Error(ErrorKind::Parse, "matrix JSON needs \"n\" and \"entries\"");
  if (!doc["n"].is_number_integer() || doc["n"].get<long long>() <= 0)
    throw Error(ErrorKind::Parse, "\"n\" must be a positive integer");
  const auto n = static_cast<Index>(doc["n"].get<long long>());
  const auto& rows = doc["entries"];
  if (!rows.is_array() || static_cast<Index>(rows.size()) != n)
    throw Error(ErrorKind::Parse, "\"entries\" must hold exactly n rows");
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n)
      throw Error(ErrorKind::Parse, "row " + std::to_string(i) + " must hold exactly n entries");
    for (Index j = 0; j < n; ++j) {
      const auto& e = row[static_cast<std::size_t>(j)];
      if (!e.is_object() || !e.contains("re") || !e.contains("im") || !e["re"].is_number() ||
          !e["im"].is_number())
        throw Error(ErrorKind::Parse, "entry (" + std::to_string(i) + "," + std::to_string(j) +
                                          ") must be {\"re\": x, \"im\": y}");
      m(i, j) = Complex(e["re"].get<double>(), e["im"].get<double>());
    }
  }
  require_square_finite(m);
  return m;
}

namespace detail {

inline double parse_real(std::string_view s, std::string_view token) {
  if (s.empty() || s == "+") return 1.0;
  if (s == "-") return -1.0;
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorKind::Parse, "bad number in token '" + std::string(token) + "'");
  return value;
}

}  // namespace detail

/// Parses one entry token of the plain-text format.
inline Complex parse_complex_token(std::string_view token) {
  if (token.empty()) throw Error(ErrorKind::Parse, "empty token");
  if (token.back() != 'i') return {detail::parse_real(token, token), 0.0};
  const std::string_view body = token.substr(0, token.size() - 1);
  // The split point is the last sign that is not leading and not an exponent sign.
  std::size_t split = std::string_view::npos;
  for (std::size_t k = body.size(); k-- > 1;) {
    if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
      split = k;
      break;
    }
  }
  if (split == std::string_view::npos) return {0.0, detail::parse_real(body, token)};
  return {detail::parse_real(body.substr(0, split), token), detail::parse_real(body.substr(split), token)};
}

inline Matrix from_text(const std::string& text) {
  std::vector<std::vector<Complex>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream tokens(line);
    std::vector<Complex> row;
    for (std::string tok; tokens >> tok;) row.push_back(parse_complex_token(tok));
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const auto n = static_cast<Index>(rows.size());
  if (n == 0) throw Error(ErrorKind::Parse, "no matrix rows found");
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(i)].size()) != n)
      throw Error(ErrorKind::Parse, "text matrix must have n lines of n tokens");
    for (Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  require_square_finite(m);
  return m;
}

/// Accepts either format; JSON is recognized by a leading '{'.
inline Matrix parse_matrix(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw Error(ErrorKind::Parse, "empty matrix input");
  if (text[first] == '{') {
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::Parse, e.what());
    }
    return from_json(doc);
  }
  return from_text(text);
}

inline Matrix read_matrix(std::istream& in) {
  return parse_matrix(std::string(std::istreambuf_iterator<char>(in), {}));
}

inline std::string format_complex(Complex z) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

inline std::string to_text(const Matrix& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += format_complex(m(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace ahm::io
