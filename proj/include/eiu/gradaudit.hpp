#pragma once

#include <string>
#include <vector>

#include "eiu/train.hpp"

namespace eiu {

// Finite-difference audit across every differentiable operation, every
// network block, and the full model driven by the joint focal loss. Runs at
// desk-scale dimensions so the whole audit takes seconds, not minutes.
struct AuditEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct AuditReport {
    std::vector<AuditEntry> entries;
    double worst = 0.0;
    std::string worst_name;
};

AuditReport gradient_audit(std::uint64_t seed, std::size_t points);

}  // namespace eiu
