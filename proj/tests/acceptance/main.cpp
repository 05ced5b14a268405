// Acceptance runner: `acceptance <n>` checks criterion n, `acceptance all` checks
// every criterion. One line per criterion; exit 0 pass, 1 fail, 77 blocked.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "acceptance.hpp"

namespace acceptance {

std::string sci(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fixed(double v, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

}  // namespace acceptance

namespace {

using namespace acceptance;

struct Criterion {
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"gradient correctness", gradient_correctness},
    {"loss-formula exactness", loss_exactness},
    {"masking soundness", masking_soundness},
    {"step-oracle equivalence", step_oracle},
    {"rotation pipeline exactness", rotation_exactness},
    {"determinism", determinism},
    {"desk-scale MNIST->USPS trend", usps_trend},
    {"SVHN degradation", svhn_degradation},
    {"t-SNE correctness", tsne_correctness},
    {"format robustness", format_robustness},
};
constexpr int kCount = sizeof kCriteria / sizeof kCriteria[0];

constexpr int kExitBlocked = 77;

int run_one(int n) {
  const Criterion& c = kCriteria[n - 1];
  Outcome out;
  try {
    out = c.run();
  } catch (const std::exception& e) {
    out = {Status::fail, std::string("exception: ") + e.what()};
  }
  const char* tag = out.status == Status::pass ? "PASS" : out.status == Status::fail ? "FAIL" : "BLOCKED";
  std::cout << "[" << tag << "] " << n << " " << c.title << ": " << out.detail << std::endl;
  return out.status == Status::pass ? 0 : out.status == Status::fail ? 1 : kExitBlocked;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string arg = argc > 1 ? argv[1] : "all";
  if (arg == "all") {
    int worst = 0;
    for (int n = 1; n <= kCount; ++n) {
      const int code = run_one(n);
      if (code == 1 || (code == kExitBlocked && worst == 0)) worst = code;
    }
    return worst;
  }
  char* end = nullptr;
  const long n = std::strtol(arg.c_str(), &end, 10);
  if (*end != '\0' || n < 1 || n > kCount) {
    std::cerr << "usage: acceptance [1-" << kCount << " | all]\n";
    return 2;
  }
  return run_one(static_cast<int>(n));
}
