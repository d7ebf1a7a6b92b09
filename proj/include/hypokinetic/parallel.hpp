#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace hypokinetic {

/// Worker count: hardware concurrency, capped by HYPOKINETIC_THREADS when set.
inline unsigned thread_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HYPOKINETIC_THREADS")) {
        try {
            long cap = std::stol(env);
            if (cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
        } catch (...) {
        }
    }
    return n;
}

namespace detail {
inline thread_local bool in_worker = false;
}

/// Runs body(i) for i in [0, n). Each index is handled by exactly one worker,
/// so results written per index are independent of scheduling. Nested calls
/// from inside a worker run serially.
template <class Body>
void parallel_for(int n, Body&& body) {
    const unsigned workers = std::min<unsigned>(thread_count(), n > 0 ? n : 1);
    if (workers <= 1 || n < 2 || detail::in_worker) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            detail::in_worker = true;
            try {
                for (int i = static_cast<int>(w); i < n; i += static_cast<int>(workers)) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace hypokinetic
