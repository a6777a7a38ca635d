// Copyright (c) 2026 The graftsim developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include "types.hpp"
#include "hash.hpp"
#include "contract.hpp"
#include "contract_io.hpp"
#include "witness.hpp"
#include "ledger.hpp"
#include "trace.hpp"
#include "compile.hpp"
#include "session.hpp"
#include "drivers.hpp"
#include "strategies.hpp"
#include "harness.hpp"
