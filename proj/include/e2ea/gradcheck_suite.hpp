// e2ea/gradcheck_suite.hpp -- named finite-difference checks over every
// layer and loss, on tiny fixed shapes.
//
// Copyright 2026 e2ea authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef E2EA_GRADCHECK_SUITE_HPP_
#define E2EA_GRADCHECK_SUITE_HPP_

#include <string>
#include <vector>

#include "e2ea/nn.hpp"

namespace e2ea {

struct NamedCheck {
  std::string name;
  GradCheckReport report;
};

// Runs the full suite (layers, CTC loss, attention NLL, fused-LM NLL,
// both encoder variants) with the given base seed.
std::vector<NamedCheck> run_gradcheck_suite(std::uint64_t seed);

}  // namespace e2ea

#endif  // E2EA_GRADCHECK_SUITE_HPP_
