// Runs the exclusion pipeline over the built-in families and prints which
// criterion (if any) shows that the matrix is not a local maximizer of the
// 1-norm on U(N).

#include <iomanip>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "ahm/ahm.hpp"

int main() {
  using namespace ahm;
  std::vector<std::pair<std::string, Matrix>> cases;
  for (Index n = 3; n <= 7; ++n) cases.emplace_back("K_" + std::to_string(n) + "/sqrt(N)", kn(n).matrix());
  cases.emplace_back("Fano U_-", pattern_unitary(incidence_fano(), Branch::RealMinus).matrix.matrix());
  cases.emplace_back("PG(2,3) U_-", pattern_unitary(incidence_projective_plane(3), Branch::RealMinus).matrix.matrix());
  cases.emplace_back("Paley biplane U_-", pattern_unitary(incidence_paley_biplane(), Branch::RealMinus).matrix.matrix());
  for (Index n = 2; n <= 6; ++n) cases.emplace_back("F_" + std::to_string(n) + "/sqrt(N)", fourier_unitary(n));

  std::cout << std::left << std::setw(20) << "matrix" << std::setw(6) << "N" << std::setw(12) << "1-norm"
            << std::setw(28) << "criterion" << "value\n";
  for (const auto& [name, u] : cases) {
    const ExclusionVerdict v = exclusion_pipeline(u);
    std::cout << std::left << std::setw(20) << name << std::setw(6) << u.rows() << std::setw(12) << std::setprecision(6)
              << one_norm(u) << std::setw(28) << to_string(v.criterion) << std::setprecision(8) << v.value << "\n";
  }
}
