#include "spfit/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace spfit::fft {

namespace {

// FFTW planning is not thread-safe; executing distinct plans is. Plans are
// created once per (length, direction) with FFTW_ESTIMATE so that repeated
// runs pick identical algorithms.
class PlanCache {
public:
    fftw_plan get(int n, int sign) {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto key = std::make_pair(n, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::vector<fftw_complex> in(static_cast<std::size_t>(n));
        std::vector<fftw_complex> out(static_cast<std::size_t>(n));
        fftw_plan p = fftw_plan_dft_1d(n, in.data(), out.data(),
                                       sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (p == nullptr) throw std::runtime_error("fft: planning failed");
        plans_.emplace(key, p);
        return p;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

}  // namespace

void cdft(const std::complex<double>* in, std::complex<double>* out, int n, int sign) {
    if (n < 1) throw std::invalid_argument("fft: length must be positive");
    fftw_plan plan = cache().get(n, sign);
    // The plan was created out-of-place with FFTW_UNALIGNED, so any pair of
    // distinct buffers is admissible for the new-array execute.
    fftw_execute_dft(plan,
                     reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace spfit::fft
