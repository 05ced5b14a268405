#pragma once

#include <chrono>
#include <string>

namespace acceptance {

enum class Status { pass, fail, blocked };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

inline Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string sci(double v, int digits = 2);  // significant digits, %g style
std::string fixed(double v, int places);

Outcome gradient_correctness();    // 1
Outcome loss_exactness();          // 2
Outcome masking_soundness();       // 3
Outcome step_oracle();             // 4
Outcome rotation_exactness();      // 5
Outcome determinism();             // 6
Outcome usps_trend();              // 7
Outcome svhn_degradation();        // 8
Outcome tsne_correctness();        // 9
Outcome format_robustness();       // 10

}  // namespace acceptance
