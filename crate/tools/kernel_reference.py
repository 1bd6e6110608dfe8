import mpmath as mp, sys, json
mp.mp.dps = 30
def params(rho,g,lam):
    rho,g,lam = mp.mpf(rho),mp.mpf(g),mp.mpf(lam)
    s,c = mp.sin(rho*mp.pi), mp.cos(rho*mp.pi)
    re = lambda r: lam - r + lam*g*c*r**rho
    # peak
    if c >= 0:
        hi = 2*lam
        while re(hi) > 0: hi *= 2
        rs = mp.findroot(re, (lam, hi), solver='bisect')
    else:
        rs = mp.findroot(re, (mp.mpf(0)+mp.mpf('1e-30'), lam), solver='bisect')
    slope = abs(-1 + lam*g*c*rho*rs**(rho-1)); h = lam*g*rs**rho*s
    w = h/slope
    return rho,g,lam,s,c,rs,w
def dens(r, P, which):
    rho,g,lam,s,c,rs,w = P
    rr = r**rho
    den = (lam - r + lam*g*c*rr)**2 + (lam*g*rr*s)**2
    if which=='A': return g/mp.pi*lam**2*s*rr/r/den
    return g/mp.pi*lam*s*rr/den
def kern(which, rho,g,lam,t, deriv=False):
    P = params(rho,g,lam); t = mp.mpf(t)
    rs,w = P[5],P[6]
    pts = [0]
    for k in [-20,-5,-1,0,1,5,20]:
        x = rs + k*w
        if x > 0: pts.append(x)
    pts += [rs*10, rs*100]
    if t > 0: pts += [1/t, 30/t]
    pts = sorted(set(pts)); pts.append(mp.inf)
    f = (lambda r: -r*dens(r,P,'B')*mp.exp(-r*t)) if deriv else (lambda r: dens(r,P,which)*mp.exp(-r*t))
    a = pts[1]
    rho = P[0]
    head = mp.quad(lambda u: f(u**(1/rho))*u**(1/rho-1)/rho, [0, a**rho], maxdegree=10)
    X = pts[-2]
    p = (2 - rho) if which=='B' else (3 - rho)
    if deriv: p = 2
    kap = 1/(p-1)
    tail = mp.quad(lambda u: f(X*u**(-kap))*X*kap*u**(-kap-1) if u > 0 else mp.mpf(0), [0, 1], maxdegree=10)
    return head + mp.quad(f, pts[1:-1], maxdegree=10) + tail
if __name__ == '__main__':
    out=[]
    for line in sys.stdin:
        w,rho,g,lam,t = line.split()
        if w=='dB': v = kern('B',rho,g,lam,t,True)
        else: v = kern(w,rho,g,lam,t)
        out.append(f"{w} {rho} {g} {lam} {t} {mp.nstr(v,20)}")
    print("\n".join(out))
