#pragma once

#include <string>

#include "dlgfa/model.hpp"

namespace dlgfa {

// JSON checkpoint holding config, all named parameters, and loadings. Doubles
// are stored as hex bit patterns so load is bit-exact.
void save_checkpoint(const DlgfaModel& model, const std::string& path);
DlgfaModel load_checkpoint(const std::string& path);

}  // namespace dlgfa
