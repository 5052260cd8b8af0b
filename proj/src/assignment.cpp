#include "citadel/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace citadel {

std::vector<Index> solve_assignment(const MatrixXd& cost) {
    const Index rows = cost.rows();
    const Index cols = cost.cols();
    if (rows > cols) throw std::invalid_argument("assignment: more rows than columns");
    if (rows == 0) return {};

    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual start column.
    std::vector<double> u(static_cast<std::size_t>(rows + 1), 0.0);
    std::vector<double> v(static_cast<std::size_t>(cols + 1), 0.0);
    std::vector<Index> match(static_cast<std::size_t>(cols + 1), 0);  // column -> row
    std::vector<Index> way(static_cast<std::size_t>(cols + 1), 0);

    for (Index r = 1; r <= rows; ++r) {
        match[0] = r;
        Index col0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(cols + 1), inf);
        std::vector<bool> used(static_cast<std::size_t>(cols + 1), false);
        do {
            used[static_cast<std::size_t>(col0)] = true;
            const Index r0 = match[static_cast<std::size_t>(col0)];
            double delta = inf;
            Index col1 = 0;
            for (Index c = 1; c <= cols; ++c) {
                const auto cs = static_cast<std::size_t>(c);
                if (used[cs]) continue;
                const double reduced = cost(r0 - 1, c - 1) - u[static_cast<std::size_t>(r0)] - v[cs];
                if (reduced < minv[cs]) {
                    minv[cs] = reduced;
                    way[cs] = col0;
                }
                if (minv[cs] < delta) {
                    delta = minv[cs];
                    col1 = c;
                }
            }
            for (Index c = 0; c <= cols; ++c) {
                const auto cs = static_cast<std::size_t>(c);
                if (used[cs]) {
                    u[static_cast<std::size_t>(match[cs])] += delta;
                    v[cs] -= delta;
                } else {
                    minv[cs] -= delta;
                }
            }
            col0 = col1;
        } while (match[static_cast<std::size_t>(col0)] != 0);
        do {
            const Index col1 = way[static_cast<std::size_t>(col0)];
            match[static_cast<std::size_t>(col0)] = match[static_cast<std::size_t>(col1)];
            col0 = col1;
        } while (col0 != 0);
    }

    std::vector<Index> result(static_cast<std::size_t>(rows), -1);
    for (Index c = 1; c <= cols; ++c) {
        const Index r = match[static_cast<std::size_t>(c)];
        if (r != 0) result[static_cast<std::size_t>(r - 1)] = c - 1;
    }
    return result;
}

}  // namespace citadel
