/** @file common.hpp
    @brief Error types and small shared utilities.
*/

#pragma once

#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace biharm {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularMatrix : SolverError {
    using SolverError::SolverError;
};
struct NotSpd : SolverError {
    using SolverError::SolverError;
};
struct IndefiniteOperator : SolverError {
    using SolverError::SolverError;
};
struct DegenerateJacobian : SolverError {
    using SolverError::SolverError;
};
struct NotMatching : SolverError {
    using SolverError::SolverError;
};
struct TopologyError : SolverError {
    using SolverError::SolverError;
};
struct ParseError : SolverError {
    using SolverError::SolverError;
};
struct UnknownDomain : SolverError {
    using SolverError::SolverError;
};

/// Global thread cap: min(BIHARMONIC_IETI_THREADS, hardware concurrency).
inline int thread_cap()
{
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("BIHARMONIC_IETI_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < hw) hw = cap;
    }
    return hw;
}

/// Runs body(i) for i in [0,n). Results must be written to disjoint slots so
/// the outcome does not depend on the number of threads.
inline void parallel_for(int n, const std::function<void(int)>& body, int jobs = 0)
{
    if (jobs <= 0) jobs = thread_cap();
    if (jobs > n) jobs = n;
    if (jobs <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < n; i += jobs) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace biharm
