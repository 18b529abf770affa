#include "subriem/errors.hpp"

#include <limits>

namespace subriem {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Input: return "INPUT_ERROR";
    case ErrorKind::Domain: return "DOMAIN_ERROR";
    case ErrorKind::Precondition: return "PRECONDITION_FAILED";
    case ErrorKind::IntegrationFailure: return "INTEGRATION_FAILURE";
    case ErrorKind::SingularJacobian: return "SINGULAR_JACOBIAN";
    case ErrorKind::NoConvergence: return "NO_CONVERGENCE";
    case ErrorKind::BranchLost: return "BRANCH_LOST";
    case ErrorKind::Unresolved: return "UNRESOLVED";
    case ErrorKind::Inconclusive: return "INCONCLUSIVE";
    case ErrorKind::NotFound: return "NOT_FOUND";
  }
  return "UNKNOWN";
}

Error::Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

IntegrationFailure::IntegrationFailure(const std::string& what, double last_valid_time)
    : Error(ErrorKind::IntegrationFailure, what), last_valid_time_(last_valid_time) {}

namespace {
std::string order_label(int m) {
  return m == std::numeric_limits<int>::max() ? std::string("INFINITE") : std::to_string(m);
}
}  // namespace

InconclusiveOrder::InconclusiveOrder(int slope_candidate, int derivative_candidate)
    : Error(ErrorKind::Inconclusive, "order estimators disagree: log-slope " + order_label(slope_candidate) +
                                         ", derivative test " + order_label(derivative_candidate)),
      slope_candidate_(slope_candidate),
      derivative_candidate_(derivative_candidate) {}

}  // namespace subriem
