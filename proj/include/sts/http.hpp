#pragma once

// Every httplib include goes through here so the tuning macros agree.
#ifndef CPPHTTPLIB_LISTEN_BACKLOG
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#endif

#include <httplib.h>
