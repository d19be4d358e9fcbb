#include "edid/errors.hpp"

#include <sstream>

namespace edid {

namespace {

std::string ill_conditioned_msg(const std::vector<double>& s, double modulus,
                                double threshold) {
    std::ostringstream os;
    os << "ill-conditioned cf point: |phi(s)| = " << modulus
       << " <= " << threshold << " at s = (";
    for (size_t i = 0; i < s.size(); ++i)
        os << (i ? ", " : "") << s[i];
    os << ")";
    return os.str();
}

std::string singular_msg(double a1, double det) {
    std::ostringstream os;
    os << "probe system singular: |det M| = " << det
       << " at candidate a1 = " << a1 << " (a1 must stay away from {0, 1})";
    return os.str();
}

std::string degenerate_msg(double aq) {
    std::ostringstream os;
    os << "degenerate probe direction: candidate a_q = " << aq
       << " too close to {0, 1}";
    return os.str();
}

} // namespace

IllConditionedPointError::IllConditionedPointError(std::vector<double> s, double modulus,
                                                   double threshold)
    : std::runtime_error(ill_conditioned_msg(s, modulus, threshold)),
      s_(std::move(s)), modulus_(modulus), threshold_(threshold) {}

SingularProbeSystemError::SingularProbeSystemError(double candidate_a1, double det)
    : std::runtime_error(singular_msg(candidate_a1, det)),
      candidate_a1_(candidate_a1), det_(det) {}

DegenerateDirectionError::DegenerateDirectionError(double candidate_aq)
    : std::runtime_error(degenerate_msg(candidate_aq)), candidate_aq_(candidate_aq) {}

} // namespace edid
