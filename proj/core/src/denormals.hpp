#pragma once

#if defined(__SSE__) || defined(__x86_64__)
#include <xmmintrin.h>
#endif

namespace nste::detail {

// Flushes subnormal floats to zero for the current thread while in scope.
// Decayed weights and vanishing ReLU gradients drift into the subnormal range
// during long runs, where x86 arithmetic is many times slower.
class FlushDenormals {
public:
#if defined(__SSE__) || defined(__x86_64__)
    FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | kFtz | kDaz); }
    ~FlushDenormals() { _mm_setcsr(saved_); }

private:
    static constexpr unsigned kFtz = 0x8000;
    static constexpr unsigned kDaz = 0x0040;
    unsigned saved_;
#else
    FlushDenormals() = default;
#endif
    FlushDenormals(const FlushDenormals&) = delete;
    FlushDenormals& operator=(const FlushDenormals&) = delete;
};

}  // namespace nste::detail
