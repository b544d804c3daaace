#pragma once

#define RDYN_VERSION "0.1.0"
