// fencepost: guard is strict, postcondition pins the exact exit value
int i;
int s;
i = 0;
s = 0;
while (i < 6) {
  i = i + 1;
  s = s + 1;
}
assert(s == i && i == 6);
