#pragma once

#include <gtest/gtest.h>

#include "nnsens/common.hpp"

#define EXPECT_ERROR_KIND(stmt, expected)                  \
    do {                                                   \
        try {                                              \
            (void)(stmt);                                  \
            ADD_FAILURE() << "no exception from " #stmt;   \
        } catch (const nnsens::Error& e) {                 \
            EXPECT_EQ(e.kind(), expected) << e.what();     \
        }                                                  \
    } while (0)
