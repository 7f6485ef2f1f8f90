#pragma once

#include <gtest/gtest.h>

#include "support.hpp"
