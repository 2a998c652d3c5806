#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace rmtest {

// Full-table Wagner-Fischer.
inline std::size_t oracle_edit(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

// tau-b by counting every pair.
inline std::optional<double> oracle_tau(const std::vector<double>& u, const std::vector<double>& v) {
  long concordant = 0, discordant = 0, tied_u = 0, tied_v = 0, pairs = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = i + 1; j < u.size(); ++j) {
      ++pairs;
      const double du = u[i] - u[j], dv = v[i] - v[j];
      if (du == 0) ++tied_u;
      if (dv == 0) ++tied_v;
      if (du == 0 || dv == 0) continue;
      ((du > 0) == (dv > 0) ? concordant : discordant)++;
    }
  }
  if (tied_u == pairs || tied_v == pairs) return std::nullopt;
  return static_cast<double>(concordant - discordant) /
         std::sqrt(static_cast<double>(pairs - tied_u) * static_cast<double>(pairs - tied_v));
}

}  // namespace rmtest
