#ifndef JITID_TESTS_DIFF_ORACLE_HPP
#define JITID_TESTS_DIFF_ORACLE_HPP

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace jitid::testsupport {

/** Reference quadratic DP: insert/delete edit distance between two streams.
 *  Kept independent of the production diff so it can act as its oracle. */
inline size_t edit_distance_oracle(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<size_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= m; ++j) {
            if (a[i - 1] == b[j - 1])
                cur[j] = prev[j - 1];
            else
                cur[j] = 1 + std::min(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

/** Random subtoken stream over a small alphabet. */
inline std::vector<std::string> random_stream(std::mt19937_64& rng, size_t max_len,
                                              int alphabet = 12) {
    std::uniform_int_distribution<size_t> len_dist(0, max_len);
    std::uniform_int_distribution<int> tok_dist(0, alphabet - 1);
    std::vector<std::string> out(len_dist(rng));
    for (auto& t : out) t = "tok" + std::to_string(tok_dist(rng));
    return out;
}

/** Mutates a copy of `base` with a few random splices, so pairs share
 *  realistic common subsequences. */
inline std::vector<std::string> mutate_stream(std::mt19937_64& rng,
                                              std::vector<std::string> base,
                                              int alphabet = 12) {
    std::uniform_int_distribution<int> op_count(0, 4);
    std::uniform_int_distribution<int> tok_dist(0, alphabet - 1);
    int edits = op_count(rng);
    for (int e = 0; e < edits; ++e) {
        if (base.empty()) {
            base.push_back("tok" + std::to_string(tok_dist(rng)));
            continue;
        }
        std::uniform_int_distribution<size_t> pos_dist(0, base.size() - 1);
        size_t pos = pos_dist(rng);
        switch (rng() % 3) {
            case 0: base.erase(base.begin() + static_cast<long>(pos)); break;
            case 1: base.insert(base.begin() + static_cast<long>(pos),
                                "tok" + std::to_string(tok_dist(rng))); break;
            default: base[pos] = "tok" + std::to_string(tok_dist(rng)); break;
        }
    }
    return base;
}

}   // namespace jitid::testsupport

#endif
